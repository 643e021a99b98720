"""Supports of the regression function: polytopes and Euclidean balls.

A polytope is stored through a simplicial decomposition (vertex list plus
simplices as index tuples), which is what uniform sampling and membership
tests need. A ball is a center and a radius. Both are immutable.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, Delaunay
from scipy.spatial.distance import pdist

__all__ = [
    "Domain", "Polytope", "Ball", "Cap",
    "domain_width", "sample_design", "disjoint_caps", "sample_sphere",
    "domain_from_dict", "load_domain", "save_domain",
]


class Domain:
    """Common interface of :class:`Polytope` and :class:`Ball`."""

    kind = None

    @property
    def dim(self):
        raise NotImplementedError

    @property
    def width(self):
        raise NotImplementedError

    @property
    def volume(self):
        raise NotImplementedError

    def contains(self, points, tol=1e-10):
        raise NotImplementedError

    def sample(self, n, rng, max_attempts=1000):
        raise NotImplementedError

    def boundary_points(self, count=None):
        raise NotImplementedError

    def to_dict(self):
        raise NotImplementedError


def _simplex_volume(V):
    d = V.shape[1]
    return abs(np.linalg.det(V[1:] - V[0])) / math.factorial(d)


def _barycentric(V, points):
    """Barycentric coordinates of ``points`` (k, d) in simplex ``V`` (d+1, d)."""
    T = (V[1:] - V[0]).T
    lam = np.linalg.solve(T, (points - V[0]).T).T
    return np.column_stack([1.0 - lam.sum(axis=1), lam])


class Polytope(Domain):
    """Polytope given by vertices and a simplicial decomposition.

    Parameters
    ----------
    vertices : array-like (k, d)
    simplices : array-like of int (s, d+1)
        Each row lists the vertex indices of one simplex.
    check_samples : int
        Random interior points per simplex used to check that simplex
        interiors are pairwise disjoint. 0 disables the check.
    seed : int
        Seed for the disjointness check.
    """

    kind = "polytope"

    def __init__(self, vertices, simplices, check_samples=20, seed=0):
        V = np.atleast_2d(np.asarray(vertices, dtype=float))
        S = np.atleast_2d(np.asarray(simplices, dtype=int))
        d = V.shape[1]
        if S.shape[1] != d + 1:
            raise ValueError(f"simplices need {d + 1} vertex indices, got {S.shape[1]}")
        if S.min() < 0 or S.max() >= len(V):
            raise ValueError("simplex index out of range")
        vols = np.array([_simplex_volume(V[s]) for s in S])
        scale = max(np.max(np.abs(V)), 1.0) ** d
        if np.any(vols <= 1e-14 * scale):
            raise ValueError("degenerate simplex in decomposition")
        self._V = V
        self._S = S
        self._vols = vols
        self._V.setflags(write=False)
        self._S.setflags(write=False)
        if check_samples and len(S) > 1:
            self._check_disjoint(check_samples, seed)

    def _check_disjoint(self, n_points, seed):
        rng = np.random.default_rng(seed)
        for i, s in enumerate(self._S):
            w = rng.dirichlet(np.ones(self.dim + 1), size=n_points)
            # shrink toward the barycenter to stay strictly interior
            w = 0.9 * w + 0.1 / (self.dim + 1)
            pts = w @ self._V[s]
            for j, t in enumerate(self._S):
                if j == i:
                    continue
                lam = _barycentric(self._V[t], pts)
                if np.any(np.all(lam > 1e-9, axis=1)):
                    raise ValueError(f"simplices {i} and {j} overlap")

    @classmethod
    def from_points(cls, points, **kwargs):
        """Convex hull of ``points``, triangulated (Delaunay in d >= 2)."""
        P = np.atleast_2d(np.asarray(points, dtype=float))
        if P.shape[1] == 1:
            lo, hi = P.min(), P.max()
            return cls([[lo], [hi]], [[0, 1]], **kwargs)
        hull = ConvexHull(P)
        V = P[hull.vertices]
        tri = Delaunay(V)
        return cls(V, tri.simplices, **kwargs)

    @classmethod
    def interval(cls, a=0.0, b=1.0):
        if not b > a:
            raise ValueError("need a < b")
        return cls([[a], [b]], [[0, 1]])

    @classmethod
    def hypercube(cls, d, low=0.0, high=1.0):
        """Axis-aligned cube triangulated into d! Kuhn simplices."""
        corners = np.array(list(itertools.product([0, 1], repeat=d)), dtype=float)
        index = {tuple(c.astype(int)): i for i, c in enumerate(corners)}
        simplices = []
        for perm in itertools.permutations(range(d)):
            path = [np.zeros(d, dtype=int)]
            for axis in perm:
                nxt = path[-1].copy()
                nxt[axis] = 1
                path.append(nxt)
            simplices.append([index[tuple(p)] for p in path])
        V = low + (high - low) * corners
        return cls(V, simplices, check_samples=0)

    @classmethod
    def standard_simplex(cls, d):
        V = np.vstack([np.zeros(d), np.eye(d)])
        return cls(V, [list(range(d + 1))])

    @property
    def vertices(self):
        return self._V

    @property
    def simplices(self):
        return self._S

    @property
    def dim(self):
        return self._V.shape[1]

    @property
    def width(self):
        if len(self._V) < 2:
            return 0.0
        return float(pdist(self._V).max())

    @property
    def volume(self):
        return float(self._vols.sum())

    @property
    def simplex_volumes(self):
        return self._vols.copy()

    def is_hypercube(self):
        """True if the polytope is an axis-aligned cube (all 2^d corners)."""
        lo, hi = self._V.min(axis=0), self._V.max(axis=0)
        side = hi - lo
        if not np.allclose(side, side[0]) or len(self._V) != 2 ** self.dim:
            return False
        corners = {tuple(np.round((v - lo) / side[0]).astype(int)) for v in self._V}
        return len(corners) == 2 ** self.dim and np.isclose(self.volume, side[0] ** self.dim)

    def contains(self, points, tol=1e-10):
        X = np.atleast_2d(np.asarray(points, dtype=float))
        inside = np.zeros(len(X), dtype=bool)
        for s in self._S:
            lam = _barycentric(self._V[s], X)
            inside |= np.all(lam >= -tol, axis=1)
        return inside

    def sample(self, n, rng, max_attempts=1000):
        # simplex by volume, then uniform barycentric weights
        idx = rng.choice(len(self._S), size=n, p=self._vols / self._vols.sum())
        e = rng.exponential(size=(n, self.dim + 1))
        w = e / e.sum(axis=1, keepdims=True)
        return np.einsum("nk,nkd->nd", w, self._V[self._S[idx]])

    def boundary_points(self, count=None):
        return self._V.copy()

    def to_dict(self):
        return {"kind": self.kind, "vertices": self._V.tolist(),
                "simplices": self._S.tolist()}

    def __repr__(self):
        return (f"Polytope(d={self.dim}, vertices={len(self._V)}, "
                f"simplices={len(self._S)})")


class Ball(Domain):
    """Euclidean ball ``{x : |x - center| <= radius}``."""

    kind = "ball"

    def __init__(self, center, radius):
        c = np.atleast_1d(np.asarray(center, dtype=float)).copy()
        if not radius > 0:
            raise ValueError("radius must be positive")
        c.setflags(write=False)
        self._c = c
        self._r = float(radius)

    @property
    def center(self):
        return self._c

    @property
    def radius(self):
        return self._r

    @property
    def dim(self):
        return self._c.shape[0]

    @property
    def width(self):
        return 2.0 * self._r

    @property
    def volume(self):
        d = self.dim
        return math.pi ** (d / 2) / math.gamma(d / 2 + 1) * self._r ** d

    def contains(self, points, tol=1e-10):
        X = np.atleast_2d(np.asarray(points, dtype=float))
        return np.linalg.norm(X - self._c, axis=1) <= self._r * (1 + tol)

    def sample(self, n, rng, max_attempts=1000):
        """Rejection sampling from the bounding cube."""
        out = np.empty((0, self.dim))
        for _ in range(max_attempts):
            need = n - len(out)
            if need <= 0:
                break
            batch = max(2 * need, 16)
            Z = rng.uniform(-1.0, 1.0, size=(batch, self.dim))
            Z = Z[np.sum(Z * Z, axis=1) <= 1.0]
            out = np.vstack([out, Z[:need]])
        else:
            raise RuntimeError("rejection sampling did not produce enough points")
        if len(out) < n:
            raise RuntimeError("rejection sampling did not produce enough points")
        return self._c + self._r * out

    def boundary_points(self, count=None):
        """Quasi-uniform points on the sphere (default ``64 d`` of them)."""
        count = 64 * self.dim if count is None else count
        return self._c + self._r * _sphere_grid(self.dim, count)

    def to_dict(self):
        return {"kind": self.kind, "center": self._c.tolist(), "radius": self._r}

    def __repr__(self):
        return f"Ball(center={self._c.tolist()}, radius={self._r})"


def _sphere_grid(d, count):
    if d == 1:
        return np.array([[-1.0], [1.0]])
    if d == 2:
        t = 2 * np.pi * np.arange(count) / count
        return np.column_stack([np.cos(t), np.sin(t)])
    if d == 3:
        # Fibonacci lattice
        i = np.arange(count) + 0.5
        phi = np.arccos(1 - 2 * i / count)
        theta = np.pi * (1 + 5 ** 0.5) * i
        return np.column_stack([np.cos(theta) * np.sin(phi),
                                np.sin(theta) * np.sin(phi), np.cos(phi)])
    return sample_sphere(count, d, seed=0)


def sample_sphere(n, d, seed=None, rng=None):
    """Uniform directions on the unit sphere via normalized Gaussians."""
    rng = np.random.default_rng(seed) if rng is None else rng
    Z = rng.standard_normal(size=(n, d))
    return Z / np.linalg.norm(Z, axis=1, keepdims=True)


def domain_width(dom):
    """Largest distance between two points of ``dom``."""
    return dom.width


def sample_design(dom, n, seed, density=None, max_attempts=1000):
    """Draw ``n`` i.i.d. points uniformly from ``dom``.

    ``density`` is reserved for non-uniform design laws; only the uniform law
    is implemented.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if density is not None:
        raise NotImplementedError("only the uniform design law is implemented")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return dom.sample(n, rng, max_attempts=max_attempts)


@dataclass(frozen=True)
class Cap:
    """Cap ``{x : x . normal >= offset}`` of height ``height``."""

    normal: np.ndarray
    offset: float
    height: float

    def __post_init__(self):
        nrm = np.asarray(self.normal, dtype=float)
        if abs(np.linalg.norm(nrm) - 1.0) > 1e-10:
            raise ValueError("cap normal must be a unit vector")
        if not self.height > 0:
            raise ValueError("cap height must be positive")
        object.__setattr__(self, "normal", nrm)

    def contains(self, points):
        X = np.atleast_2d(np.asarray(points, dtype=float))
        return X @ self.normal >= self.offset


def disjoint_caps(dom, eta, max_caps=10_000, seed=0, n_candidates=None):
    """Greedy packing of caps of height ``eta`` with disjoint base disks.

    Two caps of height ``eta`` on a ball of radius ``r`` are disjoint when
    the angle between their normals exceeds ``2 arccos(1 - eta / r)``.
    Candidate directions are drawn uniformly and accepted greedily.
    """
    if not isinstance(dom, Ball):
        raise TypeError("caps are only defined for Ball domains")
    if not 0 < eta < dom.radius:
        raise ValueError("need 0 < eta < radius")
    half_angle = math.acos(1.0 - eta / dom.radius)
    cos_sep = math.cos(min(2 * half_angle, math.pi))
    rng = np.random.default_rng(seed)
    d = dom.dim
    if n_candidates is None:
        n_candidates = min(200 * max_caps, 20_000)
    if d == 1:
        dirs = np.array([[1.0], [-1.0]])
    else:
        dirs = sample_sphere(n_candidates, d, rng=rng)
    chosen = []
    for u in dirs:
        if len(chosen) >= max_caps:
            break
        if chosen and np.max(np.asarray(chosen) @ u) >= cos_sep:
            continue
        chosen.append(u)
    c, r = dom.center, dom.radius
    return [Cap(u, float(c @ u + r - eta), float(eta)) for u in chosen]


def domain_from_dict(data):
    kind = data.get("kind")
    if kind == "polytope":
        extra = set(data) - {"kind", "vertices", "simplices"}
        if extra:
            raise ValueError(f"unknown domain keys: {sorted(extra)}")
        return Polytope(data["vertices"], data["simplices"])
    if kind == "ball":
        extra = set(data) - {"kind", "center", "radius"}
        if extra:
            raise ValueError(f"unknown domain keys: {sorted(extra)}")
        return Ball(data["center"], data["radius"])
    raise ValueError(f"unknown domain kind {kind!r}")


def save_domain(dom, path):
    with open(path, "w") as fh:
        json.dump(dom.to_dict(), fh)


def load_domain(path):
    with open(path) as fh:
        return domain_from_dict(json.load(fh))
