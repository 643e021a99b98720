"""Least squares over max-affine functions with at most ``m`` pieces.

The non-convex fit alternates between assigning each design point to the
piece that is active there and refitting every piece by ordinary least
squares on its cell. A round is kept only when it lowers the objective, so
the objective history is nonincreasing. The best of several randomized
restarts (plus optional warm starts) is returned.

A cosine-basis linear sieve on ``[0, 1]`` is included as a baseline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .blse import BlseSpec, SolverError, fit_blse
from .funcspace import MaxAffine
from .geometry import Ball

__all__ = [
    "SieveFitConfig", "fit_max_affine", "alternation_round", "sieve_objective",
    "clip_to_bound", "cosine_basis", "fit_linear_sieve", "LinearSieve",
    "MaxAffineRegressor", "LinearSieveRegressor",
]


@dataclass
class SieveFitConfig:
    """Options of :func:`fit_max_affine`.

    Parameters
    ----------
    m : int
        Maximum number of affine pieces.
    restarts : int, optional
        Random restarts; defaults to ``10 + m``.
    max_rounds : int
        Alternation rounds per restart.
    gamma : float
        If finite, intercepts are lowered so that the fit stays below
        ``gamma`` on the domain (or on the design when no domain is given).
    fix_intercepts_zero : bool
        Fit pieces through the origin (support functions).
    seed : int
    ridge : float
        Ridge added to the normal equations of rank-deficient cells.
    """

    m: int
    restarts: int = None
    max_rounds: int = 100
    gamma: float = math.inf
    fix_intercepts_zero: bool = False
    seed: int = 0
    ridge: float = 1e-8

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be at least 1")
        if self.restarts is None:
            self.restarts = 10 + self.m
        if self.restarts < 1 or self.max_rounds < 1:
            raise ValueError("restarts and max_rounds must be positive")


def sieve_objective(f, X, Y):
    """Mean squared residual ``(1/n) sum (Y_i - f(X_i))^2``."""
    r = Y - f(X)
    return float(r @ r) / len(Y)


def _design_matrix(X, fix_zero):
    return X if fix_zero else np.column_stack([X, np.ones(len(X))])


def _fit_cell(Z, Y, ridge):
    coef, _, rank, _ = np.linalg.lstsq(Z, Y, rcond=None)
    k = Z.shape[1]
    if rank == k:
        return coef
    # rank-deficient cell: ridge keeps the piece bounded
    return np.linalg.solve(Z.T @ Z + ridge * np.eye(k), Z.T @ Y)


def _refit(labels, X, Y, m, fix_zero, ridge):
    Z = _design_matrix(X, fix_zero)
    slopes, intercepts = [], []
    for k in range(m):
        idx = labels == k
        if not np.any(idx):
            continue
        coef = _fit_cell(Z[idx], Y[idx], ridge)
        slopes.append(coef[:X.shape[1]])
        intercepts.append(0.0 if fix_zero else coef[-1])
    return MaxAffine(np.array(slopes), np.array(intercepts))


def clip_to_bound(f, gamma, domain=None, X=None):
    """Lower intercepts so that ``sup f <= gamma`` on ``domain`` (or on ``X``)."""
    if not math.isfinite(gamma):
        return f
    A, b = f.slopes, f.intercepts
    if isinstance(domain, Ball):
        peak = A @ domain.center + domain.radius * np.linalg.norm(A, axis=1)
    else:
        pts = domain.vertices if domain is not None else X
        peak = np.max(pts @ A.T, axis=0)
    return MaxAffine(A, np.minimum(b, gamma - peak))


def alternation_round(f, X, Y, cfg, domain=None):
    """One partition/refit round. Returns ``f`` itself unless the objective drops."""
    labels = f.argmax(X)
    g = _refit(labels, X, Y, f.n_pieces, cfg.fix_intercepts_zero, cfg.ridge)
    g = clip_to_bound(g, cfg.gamma, domain, X)
    if sieve_objective(g, X, Y) < sieve_objective(f, X, Y):
        return g
    return f


def _run(f, X, Y, cfg, domain):
    history = [sieve_objective(f, X, Y)]
    for _ in range(cfg.max_rounds):
        g = alternation_round(f, X, Y, cfg, domain)
        if g is f:
            break
        f = g
        obj = sieve_objective(f, X, Y)
        converged = history[-1] - obj <= 1e-14 * (1.0 + history[-1])
        history.append(obj)
        if converged:
            break
    return f, history


def _random_start(X, Y, cfg, rng):
    n = len(X)
    k = min(cfg.m, n)
    centers = X[rng.choice(n, size=k, replace=False)]
    d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    labels = np.argmin(d2, axis=1)
    f = _refit(labels, X, Y, k, cfg.fix_intercepts_zero, cfg.ridge)
    return f


def _split_start(f, X, Y, cfg):
    # add a piece fitted to the points lying above the fit in the worst cell
    labels = f.argmax(X)
    resid = Y - f(X)
    sse = np.bincount(labels, weights=resid ** 2, minlength=f.n_pieces)
    worst = int(np.argmax(sse))
    idx = (labels == worst) & (resid > 0)
    if idx.sum() < X.shape[1] + 1:
        return None
    Z = _design_matrix(X[idx], cfg.fix_intercepts_zero)
    coef = _fit_cell(Z, Y[idx], cfg.ridge)
    a = coef[:X.shape[1]]
    b = 0.0 if cfg.fix_intercepts_zero else coef[-1]
    return MaxAffine(np.vstack([f.slopes, a]), np.append(f.intercepts, b))


def _lse_start(X, Y, cfg, domain):
    # with m >= n distinct points the class contains the convex LSE itself
    n_unique = len(np.unique(X, axis=0))
    if cfg.fix_intercepts_zero or cfg.m < n_unique or n_unique * (1 + X.shape[1]) > 3000:
        return None
    bounded = math.isfinite(cfg.gamma) and domain is not None
    spec = BlseSpec(X, Y, cfg.gamma if bounded else math.inf, domain if bounded else None)
    try:
        f = fit_blse(spec, tol=1e-9).estimator
    except SolverError:
        return None
    return clip_to_bound(f, cfg.gamma, domain, X)


def fit_max_affine(X, Y, cfg, domain=None, init=None, return_info=False):
    """Least-squares fit over max-affine functions with at most ``cfg.m`` pieces.

    Parameters
    ----------
    X : ndarray (n, d)
    Y : ndarray (n,)
    cfg : SieveFitConfig
    domain : Polytope or Ball, optional
        Used for the ``gamma`` clip.
    init : MaxAffine or list of MaxAffine, optional
        Warm starts tried in addition to the random restarts. A warm start
        with fewer than ``m`` pieces is also extended by one split piece.
        When ``m`` is at least the number of distinct design points, the
        convex least-squares fit is added as a start as well.
    return_info : bool
        Also return a dict with the objective, history and restart values.

    Returns
    -------
    MaxAffine or (MaxAffine, dict)
        Empty cells are dropped, so at most ``m`` pieces are returned.

    Examples
    --------
    >>> import numpy as np
    >>> x = np.r_[-np.arange(1, 11), np.arange(1, 11)][:, None] / 10
    >>> f = fit_max_affine(x, np.abs(x[:, 0]), SieveFitConfig(m=2))
    >>> np.round(np.sort(f.slopes[:, 0]), 8).tolist()
    [-1.0, 1.0]
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    Y = np.asarray(Y, dtype=float).ravel()
    if X.shape[0] != Y.shape[0] or X.shape[0] == 0:
        raise ValueError("X and Y must be non-empty with matching length")
    rng = np.random.default_rng(cfg.seed)

    starts = []
    inits = [] if init is None else (init if isinstance(init, (list, tuple)) else [init])
    for f0 in inits:
        if f0.n_pieces > cfg.m:
            continue
        starts.append(clip_to_bound(f0, cfg.gamma, domain, X))
        if f0.n_pieces < cfg.m:
            s = _split_start(f0, X, Y, cfg)
            if s is not None:
                starts.append(clip_to_bound(s, cfg.gamma, domain, X))
    for _ in range(cfg.restarts):
        starts.append(clip_to_bound(_random_start(X, Y, cfg, rng), cfg.gamma, domain, X))
    lse = _lse_start(X, Y, cfg, domain)
    if lse is not None:
        starts.append(lse)

    best, best_hist, values = None, None, []
    for f0 in starts:
        f, hist = _run(f0, X, Y, cfg, domain)
        values.append(hist[-1])
        if best is None or hist[-1] < best_hist[-1]:
            best, best_hist = f, hist
    if not return_info:
        return best
    return best, {"objective": best_hist[-1], "history": best_hist,
                  "restart_objectives": values, "n_pieces": best.n_pieces}


class MaxAffineRegressor(RegressorMixin, BaseEstimator):
    """Max-affine least squares with a fixed piece budget.

    Parameters
    ----------
    n_pieces : int, default=3
    restarts : int, optional
    max_rounds : int, default=100
    gamma : float, default=inf
    fit_intercept : bool, default=True
    random_state : int, default=0
    """

    def __init__(self, n_pieces=3, restarts=None, max_rounds=100, gamma=math.inf,
                 fit_intercept=True, random_state=0):
        self.n_pieces = n_pieces
        self.restarts = restarts
        self.max_rounds = max_rounds
        self.gamma = gamma
        self.fit_intercept = fit_intercept
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        cfg = SieveFitConfig(self.n_pieces, self.restarts, self.max_rounds, self.gamma,
                             not self.fit_intercept, self.random_state)
        self.estimator_, self.info_ = fit_max_affine(X, y, cfg, return_info=True)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "estimator_")
        return self.estimator_(check_array(X))


def cosine_basis(x, m):
    """``1, sqrt(2) cos(pi x), ..., sqrt(2) cos(pi (m-1) x)`` on ``[0, 1]``."""
    x = np.asarray(x, dtype=float).ravel()
    j = np.arange(m)
    B = np.sqrt(2.0) * np.cos(np.pi * np.outer(x, j))
    B[:, 0] = 1.0
    return B


@dataclass(frozen=True)
class LinearSieve:
    """Fitted cosine expansion; callable on (n, 1) or (n,) inputs."""

    coef: np.ndarray

    @property
    def m(self):
        return len(self.coef)

    def __call__(self, x):
        return cosine_basis(x, self.m) @ self.coef


def fit_linear_sieve(x, Y, m):
    """Least squares on the first ``m`` cosine basis functions (min-norm)."""
    if m < 1:
        raise ValueError("m must be at least 1")
    B = cosine_basis(x, m)
    coef = np.linalg.lstsq(B, np.asarray(Y, dtype=float).ravel(), rcond=None)[0]
    return LinearSieve(coef)


class LinearSieveRegressor(RegressorMixin, BaseEstimator):
    """Cosine-series regression on ``[0, 1]`` with ``n_terms`` basis functions."""

    def __init__(self, n_terms=5):
        self.n_terms = n_terms

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        if X.shape[1] != 1:
            raise ValueError("the cosine sieve is one-dimensional")
        self.sieve_ = fit_linear_sieve(X[:, 0], y, self.n_terms)
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "sieve_")
        return self.sieve_(check_array(X)[:, 0])
