"""Regression functions: max-affine, quadratic and the perturbed families.

Every function object is a vectorized callable mapping an (n, d) array to an
(n,) array. A 1-d array of length d is treated as a single point.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .geometry import Ball, Polytope, sample_design

__all__ = [
    "RegressionFunction", "MaxAffine", "Quadratic", "BumpPerturbed",
    "CapPerturbed", "CustomFunction", "eval_max_affine", "l2_nu_sq",
    "l2_disc_sq", "convexity_violation", "make_bump_perturbed",
    "make_cap_perturbed", "bump_cells", "inscribed_cube",
]


def _as_points(x, d=None):
    X = np.asarray(x, dtype=float)
    if X.ndim == 0:
        X = X.reshape(1, 1)
    elif X.ndim == 1:
        X = X.reshape(1, -1) if d is None or X.shape[0] == d else X.reshape(-1, 1)
    if d is not None and X.shape[1] != d:
        raise ValueError(f"expected points of dimension {d}, got {X.shape[1]}")
    return X


class RegressionFunction:
    """Base class. Subclasses implement ``_eval`` on (n, d) arrays."""

    dim = None

    def __call__(self, x):
        return self._eval(_as_points(x, self.dim))

    def _eval(self, X):
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class MaxAffine(RegressionFunction):
    """``f(x) = max_k (slopes[k] . x + intercepts[k])``.

    Parameters
    ----------
    slopes : ndarray (m, d)
    intercepts : ndarray (m,)
    """

    slopes: np.ndarray
    intercepts: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.slopes, dtype=float))
        b = np.atleast_1d(np.asarray(self.intercepts, dtype=float))
        if A.shape[0] != b.shape[0]:
            raise ValueError("slopes and intercepts disagree on the piece count")
        if A.shape[0] == 0:
            raise ValueError("a max-affine function needs at least one piece")
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "slopes", A)
        object.__setattr__(self, "intercepts", b)

    @property
    def dim(self):
        return self.slopes.shape[1]

    @property
    def n_pieces(self):
        return self.slopes.shape[0]

    @property
    def lipschitz(self):
        return float(np.linalg.norm(self.slopes, axis=1).max())

    def _eval(self, X):
        return np.max(X @ self.slopes.T + self.intercepts, axis=1)

    def argmax(self, x):
        """Index of the active piece (lowest index on ties)."""
        X = _as_points(x, self.dim)
        return np.argmax(X @ self.slopes.T + self.intercepts, axis=1)

    def sup_over(self, dom):
        """Exact supremum over a polytope or ball."""
        if isinstance(dom, Ball):
            v = (self.slopes @ dom.center + self.intercepts
                 + dom.radius * np.linalg.norm(self.slopes, axis=1))
            return float(v.max())
        return float(self(dom.vertices).max())

    def to_json(self):
        return json.dumps([{"a": a.tolist(), "b": float(b)}
                           for a, b in zip(self.slopes, self.intercepts)])

    @classmethod
    def from_json(cls, text):
        items = json.loads(text)
        return cls([it["a"] for it in items], [it["b"] for it in items])

    def __repr__(self):
        return f"MaxAffine(pieces={self.n_pieces}, d={self.dim})"


def eval_max_affine(f, x):
    """Evaluate a :class:`MaxAffine` at one point or a batch."""
    X = np.asarray(x, dtype=float)
    if X.ndim <= 1 and X.size == f.dim:
        return float(f(X.reshape(1, -1))[0])
    return f(X)


@dataclass(frozen=True, eq=False)
class Quadratic(RegressionFunction):
    """``f(x) = x' Q x + c' x + r`` with ``Q`` positive semidefinite."""

    Q: np.ndarray
    c: np.ndarray = None
    r: float = 0.0

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        if Q.shape[0] != Q.shape[1]:
            raise ValueError("Q must be square")
        Q = 0.5 * (Q + Q.T)
        if np.linalg.eigvalsh(Q).min() < -1e-10:
            raise ValueError("Q must be positive semidefinite")
        c = np.zeros(Q.shape[0]) if self.c is None else np.asarray(self.c, dtype=float)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "r", float(self.r))

    @property
    def dim(self):
        return self.Q.shape[0]

    def _eval(self, X):
        return np.einsum("ni,ij,nj->n", X, self.Q, X) + X @ self.c + self.r


@dataclass(frozen=True, eq=False)
class CustomFunction(RegressionFunction):
    """Wrap a vectorized callable ``fn(X) -> (n,)``."""

    fn: object
    dim: int = None

    def _eval(self, X):
        return np.asarray(self.fn(X), dtype=float).reshape(len(X))


def _g0(V):
    # product bump on the unit cube: it vanishes with its gradient on every
    # face, so neighbouring cells glue in C^1, and the Hessian has row sums
    # below 3 pi^2 / 20 < 2, which keeps |x|^2 - bump convex
    d = V.shape[1]
    return np.prod(np.sin(np.pi * V) ** 3, axis=1) / (20.0 * d)


def inscribed_cube(simplex):
    """Largest axis-aligned cube inside a simplex.

    Solves the linear program ``max s`` such that every corner ``c + s e``,
    ``e in {0,1}^d``, satisfies the simplex facet inequalities.

    Returns
    -------
    corner : ndarray (d,)
    side : float
    """
    V = np.asarray(simplex, dtype=float)
    d = V.shape[1]
    # facets as G x <= h from barycentric coordinates
    T = V[1:] - V[0]
    Tinv = np.linalg.inv(T.T)
    G = np.vstack([-Tinv, np.ones(d) @ Tinv])
    h = np.concatenate([-Tinv @ V[0], [1.0 + np.ones(d) @ Tinv @ V[0]]])
    # worst corner for each facet: G c + s * sum(max(G_i, 0)) <= h
    pos = np.clip(G, 0.0, None).sum(axis=1)
    A_ub = np.column_stack([G, pos])
    cost = np.zeros(d + 1)
    cost[-1] = -1.0
    res = linprog(cost, A_ub=A_ub, b_ub=h, bounds=[(None, None)] * d + [(0, None)],
                  method="highs")
    if res.status != 0:
        raise RuntimeError(f"inscribed cube LP failed: {res.message}")
    return res.x[:d], float(res.x[d])


def bump_cells(dom):
    """Axis-aligned cubes carrying the bumps: ``[(corner, side), ...]``.

    An axis-aligned hypercube is used whole; otherwise each simplex of the
    decomposition contributes its largest inscribed cube.
    """
    if not isinstance(dom, Polytope):
        raise TypeError("bump perturbations need a Polytope domain")
    if dom.is_hypercube():
        lo = dom.vertices.min(axis=0)
        side = float(dom.vertices.max(axis=0)[0] - lo[0])
        return [(lo, side)]
    return [inscribed_cube(dom.vertices[s]) for s in dom.simplices]


@dataclass(frozen=True, eq=False)
class BumpPerturbed(RegressionFunction):
    """``(gamma / w^2) (|x|^2 - sum of selected bumps)``.

    ``cubes`` holds ``(corner, side)`` pairs, each cut into ``k^d`` cells of
    relative side ``eps = 1/k``; ``tau`` has one bit per cell, cube-major and
    then C-order over the cell multi-index.
    """

    cubes: tuple
    eps: float
    tau: np.ndarray
    gamma: float
    width: float
    dim: int = field(default=None)

    @property
    def cells_per_cube(self):
        return int(round(1.0 / self.eps)) ** self.dim

    def _eval(self, X):
        k = int(round(1.0 / self.eps))
        out = np.sum(X * X, axis=1)
        per = self.cells_per_cube
        for c_idx, (corner, side) in enumerate(self.cubes):
            U = (X - corner) / side
            inside = np.all((U >= 0) & (U <= 1), axis=1)
            if not np.any(inside):
                continue
            Ui = U[inside]
            I = np.clip(np.floor(Ui * k).astype(int), 0, k - 1)
            flat = np.ravel_multi_index(I.T, (k,) * self.dim)
            on = self.tau[c_idx * per + flat].astype(bool)
            if not np.any(on):
                continue
            local = Ui[on] * k - I[on]
            idx = np.flatnonzero(inside)[on]
            out[idx] -= side ** 2 * self.eps ** 2 * _g0(local)
        return self.gamma / self.width ** 2 * out


def make_bump_perturbed(dom, eps, tau, gamma):
    """Perturbed quadratic ``f_tau`` used in lower-bound constructions.

    Parameters
    ----------
    dom : Polytope
    eps : float
        Relative cell side; ``1/eps`` must be an integer.
    tau : array-like of {0, 1}
        One bit per cell; length ``n_cubes * (1/eps)^d``.
    gamma : float
        Uniform bound scale.

    Examples
    --------
    >>> from convexreg.geometry import Polytope
    >>> f = make_bump_perturbed(Polytope.interval(0, 1), 1.0, [1], 2.0)
    >>> round(float(f([[0.5]])[0]), 12)
    0.4
    """
    k = 1.0 / eps
    if eps <= 0 or abs(k - round(k)) > 1e-9:
        raise ValueError("1/eps must be a positive integer")
    eps = 1.0 / round(k)
    cubes = tuple((np.asarray(c, dtype=float), float(s)) for c, s in bump_cells(dom))
    tau = np.asarray(tau, dtype=int).ravel()
    expected = len(cubes) * int(round(k)) ** dom.dim
    if tau.shape[0] != expected:
        raise ValueError(f"tau must have length {expected}, got {tau.shape[0]}")
    if not np.all((tau == 0) | (tau == 1)):
        raise ValueError("tau entries must be 0 or 1")
    return BumpPerturbed(cubes, eps, tau, float(gamma), dom.width, dom.dim)


@dataclass(frozen=True, eq=False)
class CapPerturbed(RegressionFunction):
    """Sum of cap spikes ``gamma (x . n_i - a_i)_+ / height_i`` over ``tau_i = 1``."""

    normals: np.ndarray
    offsets: np.ndarray
    heights: np.ndarray
    tau: np.ndarray
    gamma: float

    @property
    def dim(self):
        return self.normals.shape[1]

    def _eval(self, X):
        on = self.tau.astype(bool)
        if not np.any(on):
            return np.zeros(len(X))
        S = X @ self.normals[on].T - self.offsets[on]
        return self.gamma * np.sum(np.clip(S, 0.0, None) / self.heights[on], axis=1)


def make_cap_perturbed(dom, caps, tau, gamma):
    """Spike function supported on the selected caps of a ball.

    Each spike is affine on its cap, vanishes on the cap base and reaches
    ``gamma`` at the apex.
    """
    if not isinstance(dom, Ball):
        raise TypeError("cap perturbations need a Ball domain")
    tau = np.asarray(tau, dtype=int).ravel()
    if tau.shape[0] != len(caps):
        raise ValueError("tau must have one entry per cap")
    if not np.all((tau == 0) | (tau == 1)):
        raise ValueError("tau entries must be 0 or 1")
    normals = np.array([c.normal for c in caps], dtype=float).reshape(len(caps), dom.dim)
    offsets = np.array([c.offset for c in caps], dtype=float)
    # sup of (y . n - a) over the cap inside the ball
    heights = normals @ dom.center + dom.radius - offsets
    return CapPerturbed(normals, offsets, heights, tau, float(gamma))


def l2_nu_sq(f, g, dom=None, quad_n=20_000, seed=0, points=None):
    """Monte Carlo estimate of ``int (f - g)^2 dnu`` for uniform ``nu``.

    Pass ``points`` to reuse a quadrature sample across calls.
    """
    if points is None:
        if dom is None:
            raise ValueError("need a domain or quadrature points")
        points = sample_design(dom, quad_n, seed)
    diff = f(points) - g(points)
    return float(np.mean(diff * diff))


def l2_disc_sq(f_vals, g_vals):
    """Empirical squared distance ``(1/n) sum (f(X_i) - g(X_i))^2``."""
    a = np.asarray(f_vals, dtype=float)
    b = np.asarray(g_vals, dtype=float)
    if a.shape != b.shape:
        raise ValueError("value arrays must have the same shape")
    return float(np.mean((a - b) ** 2))


def convexity_violation(f, dom, n_triples=1000, seed=0):
    """Largest midpoint-type violation ``f(tx+(1-t)y) - t f(x) - (1-t) f(y)``."""
    rng = np.random.default_rng(seed)
    X = sample_design(dom, n_triples, rng)
    Y = sample_design(dom, n_triples, rng)
    t = rng.uniform(size=(n_triples, 1))
    Z = t * X + (1 - t) * Y
    t = t[:, 0]
    return float(np.max(f(Z) - t * f(X) - (1 - t) * f(Y)))
