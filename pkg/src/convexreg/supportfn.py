"""Convex set estimation from noisy support-function measurements.

Observations are ``Y_i = h_K(U_i) + noise`` with directions ``U_i`` on the
unit sphere and ``h_K(u) = sup_{x in K} x . u``. A polytope with ``m``
vertices has support function ``max_j v_j . u``, a max-affine function with
zero intercepts, so the sieve fit applies directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .funcspace import MaxAffine
from .geometry import sample_sphere
from .selection import (SUPPORT, ModelFamily, SelectionConstants, benchmark_cutoff,
                        fit_family, l_adaptive_select, p_adaptive_search)
from .sieve import SieveFitConfig, fit_max_affine

__all__ = [
    "SupportSample", "PolytopeEstimate", "support_eval", "fit_polytope_support",
    "losses_support", "adaptive_set_estimate", "regular_polygon",
    "SupportFunctionEstimator",
]


def _check_directions(U, tol=1e-10):
    U = np.atleast_2d(np.asarray(U, dtype=float))
    norms = np.linalg.norm(U, axis=1)
    if np.any(np.abs(norms - 1.0) > tol):
        raise ValueError("directions must have unit norm")
    return U


@dataclass
class SupportSample:
    """Directions ``U`` (n, d) and noisy support values ``Y`` (n,)."""

    directions: np.ndarray
    responses: np.ndarray

    def __post_init__(self):
        self.directions = _check_directions(self.directions)
        self.responses = np.asarray(self.responses, dtype=float).ravel()
        if len(self.responses) != len(self.directions):
            raise ValueError("directions and responses disagree on n")

    @property
    def n(self):
        return len(self.responses)

    @property
    def dim(self):
        return self.directions.shape[1]


@dataclass
class PolytopeEstimate:
    """Polytope given by a vertex list (possibly with redundant points)."""

    vertices: np.ndarray

    def __post_init__(self):
        self.vertices = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        if self.vertices.size == 0:
            raise ValueError("a polytope needs at least one vertex")

    @property
    def dim(self):
        return self.vertices.shape[1]

    def __call__(self, U):
        return support_eval(self, U)

    def as_max_affine(self):
        return MaxAffine(self.vertices, np.zeros(len(self.vertices)))

    def hull_vertices(self):
        """Vertices of the convex hull (the extreme points)."""
        V = self.vertices
        if len(V) <= self.dim:
            return V.copy()
        try:
            return V[ConvexHull(V).vertices]
        except Exception:
            return V.copy()

    def to_dict(self):
        return {"vertices": self.vertices.tolist()}


def support_eval(K, U):
    """``h_K(u) = max_j v_j . u`` for each row of ``U``."""
    U = np.atleast_2d(np.asarray(U, dtype=float))
    return np.max(U @ K.vertices.T, axis=1)


def regular_polygon(k, radius=1.0, phase=0.0):
    """Vertices of a regular ``k``-gon centered at the origin."""
    t = phase + 2 * np.pi * np.arange(k) / k
    return radius * np.column_stack([np.cos(t), np.sin(t)])


def _project_ball(V, gamma):
    if not math.isfinite(gamma):
        return V
    r = np.linalg.norm(V, axis=1, keepdims=True)
    return V * np.minimum(1.0, gamma / np.maximum(r, 1e-300))


def fit_polytope_support(sample, m, cfg=None, init=None):
    """Least-squares polytope with at most ``m`` vertices.

    Vertices are projected into the ball of radius ``cfg.gamma`` when the
    bound is finite.
    """
    cfg = SieveFitConfig(m=m) if cfg is None else cfg
    # the bound is enforced on the vertices, not through the intercept clip
    inner = SieveFitConfig(m, cfg.restarts, cfg.max_rounds, math.inf, True,
                           cfg.seed, cfg.ridge)
    f = fit_max_affine(sample.directions, sample.responses, inner, init=init)
    return PolytopeEstimate(_project_ball(f.slopes, cfg.gamma))


def losses_support(K1, K2, norm="c", directions=None, quad_n=20_000, seed=0, d=None):
    """Squared distance between support functions.

    ``norm="c"`` averages over uniform sphere directions (Monte Carlo with
    ``quad_n`` points unless ``directions`` is given); ``norm="d"`` averages
    over the given design directions.
    """
    if directions is None:
        if norm == "d":
            raise ValueError("the discrete loss needs the design directions")
        d = K1.dim if d is None else d
        directions = sample_sphere(quad_n, d, seed)
    diff = support_eval(K1, directions) - support_eval(K2, directions)
    return float(np.mean(diff * diff))


def adaptive_set_estimate(sample, consts, rule="P", norm="d", max_m=None, patience=3,
                          quad_n=20_000, seed=0, restarts=None):
    """Polytope estimate with a data-driven vertex count.

    Returns
    -------
    PolytopeEstimate, dict
        The estimate and the selection audit.
    """
    family = ModelFamily(SUPPORT, sample.dim)
    U, Y = sample.directions, sample.responses
    if rule == "P":
        res, fits = p_adaptive_search(U, Y, consts, family, max_m, patience,
                                      seed=seed, restarts=restarts, fix_zero=True)
    elif rule == "L":
        cutoff = benchmark_cutoff(family, sample.n)
        fits = fit_family(U, Y, range(1, cutoff + 1), family, seed=seed,
                          restarts=restarts, fix_zero=True)
        pts = U if norm == "d" else sample_sphere(quad_n, sample.dim, seed)
        res = l_adaptive_select(fits, pts, consts, family, sample.n, norm)
    else:
        raise ValueError("rule must be 'P' or 'L'")
    K = PolytopeEstimate(_project_ball(fits[res.m_hat].slopes, consts.gamma))
    audit = dict(res.audit, m_hat=res.m_hat)
    return K, audit


class SupportFunctionEstimator(BaseEstimator):
    """Polytope estimate of a convex body from noisy support values.

    Parameters
    ----------
    n_vertices : int or None, default=None
        Fixed vertex budget; ``None`` selects it from the data.
    sigma : float, default=1.0
        Noise standard deviation (used by the selection rule).
    rule : {"P", "L"}, default="P"
    preset : {"practical", "theory"}, default="practical"
    gamma : float, default=inf
        Radius of a ball known to contain the body.
    random_state : int, default=0

    Attributes
    ----------
    polytope_ : PolytopeEstimate
    m_hat_ : int
    """

    def __init__(self, n_vertices=None, sigma=1.0, rule="P", preset="practical",
                 gamma=math.inf, random_state=0):
        self.n_vertices = n_vertices
        self.sigma = sigma
        self.rule = rule
        self.preset = preset
        self.gamma = gamma
        self.random_state = random_state

    def fit(self, U, y):
        U, y = check_X_y(U, y, y_numeric=True)
        sample = SupportSample(U, y)
        if self.n_vertices is not None:
            cfg = SieveFitConfig(m=self.n_vertices, gamma=self.gamma,
                                 seed=self.random_state)
            self.polytope_ = fit_polytope_support(sample, self.n_vertices, cfg)
            self.m_hat_ = self.n_vertices
            self.audit_ = {}
        else:
            consts = SelectionConstants.from_preset(self.preset, self.sigma ** 2, self.gamma)
            self.polytope_, self.audit_ = adaptive_set_estimate(
                sample, consts, self.rule, seed=self.random_state)
            self.m_hat_ = self.audit_["m_hat"]
        self.n_features_in_ = U.shape[1]
        return self

    def predict(self, U):
        check_is_fitted(self, "polytope_")
        return support_eval(self.polytope_, _check_directions(check_array(U), 1e-8))
