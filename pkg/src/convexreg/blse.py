"""Bounded least-squares estimation of a convex regression function.

Given design points ``X_i`` in a domain and responses ``Y_i``, the estimator
solves a quadratic program over fitted values ``y_i`` and subgradients
``g_i``:

    minimize    sum_i (Y_i - y_i)^2
    subject to  y_j >= y_i + g_i . (X_j - X_i)          for all i != j
                -gamma <= y_i <= gamma
                y_i + g_i . (v - X_i) <= gamma          for boundary points v

and returns the max-affine extension ``x -> max_i (y_i + g_i . (x - X_i))``.
With ``gamma = inf`` only the first family of constraints is present and the
problem is the classical convex least-squares estimator.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .funcspace import MaxAffine
from .geometry import Polytope
from .qp import QpProblem, QpStatus, solve_qp

logger = logging.getLogger(__name__)

__all__ = [
    "BlseSpec", "BlseFit", "SolverError", "build_blse_qp", "fit_blse",
    "ConvexRegressor", "counterexample_lse_d1", "counterexample_closed_form",
    "COUNTEREXAMPLE_DESIGN", "COUNTEREXAMPLE_RESPONSES",
]


class SolverError(RuntimeError):
    """Raised when the QP solver does not reach the requested tolerance."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report or {}


@dataclass
class BlseSpec:
    """Data and constraints of one bounded least-squares problem.

    Parameters
    ----------
    design : ndarray (n, d)
    responses : ndarray (n,)
    gamma : float
        Uniform bound; ``inf`` gives the unconstrained estimator.
    domain : Polytope or Ball, optional
        Needed when ``gamma`` is finite. Design points must lie inside.
    boundary_points : ndarray (k, d), optional
        Points where the sup constraint is imposed. Defaults to the polytope
        vertices, or ``64 d`` quasi-uniform sphere points for a ball.
    """

    design: np.ndarray
    responses: np.ndarray
    gamma: float = math.inf
    domain: object = None
    boundary_points: np.ndarray = None

    def __post_init__(self):
        X = np.asarray(self.design, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        Y = np.asarray(self.responses, dtype=float).ravel()
        if X.shape[0] < 1:
            raise ValueError("need at least one observation")
        if X.shape[0] != Y.shape[0]:
            raise ValueError("design and responses disagree on n")
        if not np.all(np.isfinite(X)) or not np.all(np.isfinite(Y)):
            raise ValueError("design and responses must be finite")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.domain is not None:
            if self.domain.dim != X.shape[1]:
                raise ValueError("domain dimension does not match the design")
            if not np.all(self.domain.contains(X, tol=1e-9)):
                raise ValueError("design points outside the domain")
        if math.isfinite(self.gamma):
            if self.boundary_points is None:
                if self.domain is None:
                    raise ValueError("a finite gamma needs a domain or boundary points")
                self.boundary_points = self.domain.boundary_points()
            self.boundary_points = np.atleast_2d(
                np.asarray(self.boundary_points, dtype=float))
        self.design = X
        self.responses = Y

    @property
    def n(self):
        return self.design.shape[0]

    @property
    def dim(self):
        return self.design.shape[1]


@dataclass
class BlseFit:
    """Result of :func:`fit_blse`.

    Attributes
    ----------
    y_hat : ndarray (n,)
        Fitted values at the design points (original order).
    g_hat : ndarray (n, d)
        Subgradients at the design points.
    estimator : MaxAffine
        Canonical max-affine extension.
    solver_report : dict
    """

    y_hat: np.ndarray
    g_hat: np.ndarray
    estimator: MaxAffine
    solver_report: dict = field(default_factory=dict)

    def predict(self, x):
        return self.estimator(x)

    def to_dict(self):
        return {
            "y_hat": self.y_hat.tolist(),
            "g_hat": self.g_hat.tolist(),
            "slopes": self.estimator.slopes.tolist(),
            "intercepts": self.estimator.intercepts.tolist(),
            "solver_report": self.solver_report,
        }


def _merge_duplicates(X, Y):
    # identical design points share a fitted value; keep the mean response
    Xu, inverse, counts = np.unique(X, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()
    Ybar = np.bincount(inverse, weights=Y) / counts
    return Xu, Ybar, counts.astype(float), inverse


def build_blse_qp(spec, weights=None):
    """Assemble the QP of ``spec`` (design points taken as given).

    Variables are ordered ``(y_1..y_n, g_1..g_n)``. Rows are the ``n(n-1)``
    convexity constraints (pairs ``(i, j)``, ``i`` major), then ``n`` box rows
    and ``n k`` boundary rows when ``gamma`` is finite.

    Parameters
    ----------
    spec : BlseSpec
    weights : ndarray (n,), optional
        Observation weights in the squared loss (multiplicities after merging
        duplicated design points).

    Examples
    --------
    >>> import numpy as np
    >>> qp = build_blse_qp(BlseSpec(np.zeros((3, 2)) + np.arange(3)[:, None], np.zeros(3)))
    >>> qp.n_variables, qp.n_constraints
    (9, 6)
    """
    X, Y = spec.design, spec.responses
    n, d = X.shape
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    N = n * (1 + d)

    P = sp.diags(np.concatenate([2.0 * w, np.zeros(n * d)]), format="csc")
    q = np.concatenate([-2.0 * w * Y, np.zeros(n * d)])

    # convexity rows: y_j - y_i - g_i . (X_j - X_i) >= 0
    I, J = np.nonzero(~np.eye(n, dtype=bool))
    n_cvx = I.shape[0]
    r = np.arange(n_cvx)
    diff = X[J] - X[I]
    rows = [r, r, np.repeat(r, d)]
    cols = [J, I, (n + I[:, None] * d + np.arange(d)).ravel()]
    vals = [np.ones(n_cvx), -np.ones(n_cvx), -diff.ravel()]
    lo = [np.zeros(n_cvx)]
    hi = [np.full(n_cvx, np.inf)]
    n_rows = n_cvx

    if math.isfinite(spec.gamma):
        G = spec.gamma
        rb = n_rows + np.arange(n)
        rows.append(rb)
        cols.append(np.arange(n))
        vals.append(np.ones(n))
        lo.append(np.full(n, -G))
        hi.append(np.full(n, G))
        n_rows += n

        V = spec.boundary_points
        k = V.shape[0]
        # y_i + g_i . (v_l - X_i) <= gamma, row index n_rows + i k + l
        ii = np.repeat(np.arange(n), k)
        ll = np.tile(np.arange(k), n)
        rr = n_rows + np.arange(n * k)
        off = V[ll] - X[ii]
        rows += [rr, np.repeat(rr, d)]
        cols += [ii, (n + ii[:, None] * d + np.arange(d)).ravel()]
        vals += [np.ones(n * k), off.ravel()]
        lo.append(np.full(n * k, -np.inf))
        hi.append(np.full(n * k, G))
        n_rows += n * k

    A = sp.coo_matrix((np.concatenate(vals),
                       (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n_rows, N)).tocsc()
    return QpProblem(P, q, A, np.concatenate(lo), np.concatenate(hi))


def fit_blse(spec, tol=1e-6, method="auto", max_iter=200_000):
    """Solve the bounded least-squares problem.

    Parameters
    ----------
    spec : BlseSpec
    tol : float
        Absolute KKT residual tolerance for the QP.
    method : {"auto", "active-set", "admm"}
        QP method, see :func:`convexreg.qp.solve_qp`.

    Returns
    -------
    BlseFit

    Raises
    ------
    SolverError
        If the QP is not solved to ``tol``. The report is attached.
    """
    X, Y = spec.design, spec.responses
    Xu, Ybar, counts, inverse = _merge_duplicates(X, Y)
    merged = BlseSpec(Xu, Ybar, spec.gamma, None, spec.boundary_points)
    problem = build_blse_qp(merged, weights=counts)
    sol = solve_qp(problem, tol=tol, max_iter=max_iter, method=method)
    report = sol.summary()
    report.update(n_unique=int(Xu.shape[0]), n_variables=problem.n_variables,
                  n_constraints=problem.n_constraints)
    if sol.status is not QpStatus.SOLVED:
        raise SolverError(f"QP not solved: {sol.status.value}", report)
    n, d = Xu.shape
    y = sol.x[:n]
    g = sol.x[n:].reshape(n, d)
    f = MaxAffine(g, y - np.einsum("ij,ij->i", g, Xu))
    if math.isfinite(spec.gamma) and spec.domain is not None:
        # the boundary constraint is only imposed at finitely many points
        report["sup_over_domain"] = f.sup_over(spec.domain)
    return BlseFit(y[inverse], g[inverse], f, report)


class ConvexRegressor(RegressorMixin, BaseEstimator):
    """Convex least-squares regression, optionally uniformly bounded.

    Parameters
    ----------
    gamma : float, default=inf
        Uniform bound on the fitted function over ``domain``.
    domain : Polytope or Ball, optional
        Support of the design. Defaults to the bounding box of the training
        inputs when ``gamma`` is finite.
    tol : float, default=1e-6
    method : {"auto", "active-set", "admm"}, default="auto"

    Attributes
    ----------
    estimator_ : MaxAffine
    fit_ : BlseFit
    n_features_in_ : int

    Examples
    --------
    >>> import numpy as np
    >>> X = np.linspace(-1, 1, 9)[:, None]
    >>> reg = ConvexRegressor().fit(X, X[:, 0] ** 2)
    >>> bool(np.allclose(reg.predict(X), X[:, 0] ** 2, atol=1e-6))
    True
    """

    def __init__(self, gamma=math.inf, domain=None, tol=1e-6, method="auto"):
        self.gamma = gamma
        self.domain = domain
        self.tol = tol
        self.method = method

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        domain = self.domain
        if domain is None and math.isfinite(self.gamma):
            lo, hi = X.min(axis=0), X.max(axis=0)
            hi = np.where(hi > lo, hi, lo + 1.0)
            domain = (Polytope.interval(lo[0], hi[0]) if X.shape[1] == 1
                      else _box(lo, hi))
        spec = BlseSpec(X, y, self.gamma, domain)
        self.fit_ = fit_blse(spec, tol=self.tol, method=self.method)
        self.estimator_ = self.fit_.estimator
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "estimator_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return self.estimator_(X)


def _box(lo, hi):
    cube = Polytope.hypercube(len(lo))
    return Polytope(lo + cube.vertices * (hi - lo), cube.simplices, check_samples=0)


# Two points on the left force a steep descent, four flat points on the right.
COUNTEREXAMPLE_DESIGN = np.array([0.4, 0.6, 0.8, 0.85, 0.9, 0.95])
COUNTEREXAMPLE_RESPONSES = np.array([1.0, -1.0, -1.0, -1.0, -1.0, -1.0])


def counterexample_closed_form(x, design=COUNTEREXAMPLE_DESIGN):
    """Line through the two leftmost fitted points, ``(2x - X1 - X2)/(X1 - X2)``."""
    x1, x2 = design[0], design[1]
    return (2.0 * np.asarray(x, dtype=float) - x1 - x2) / (x1 - x2)


def counterexample_lse_d1(gamma=math.inf, tol=1e-6, method="auto"):
    """Fit the six-point example where the unbounded estimator overshoots.

    Returns
    -------
    closed_form : callable
    fit : BlseFit
    """
    dom = Polytope.interval(0.0, 1.0)
    spec = BlseSpec(COUNTEREXAMPLE_DESIGN[:, None], COUNTEREXAMPLE_RESPONSES, gamma, dom)
    return counterexample_closed_form, fit_blse(spec, tol=tol, method=method)
