"""Data-driven choice of the number of affine pieces.

Two rules pick ``m`` from a family of fitted estimators ``f_1, f_2, ...``:

* the comparison (Lepski-type) rule keeps the smallest ``m`` whose fit is
  close to every larger fit up to the benchmark cutoff;
* the penalized rule minimizes the empirical contrast plus a penalty
  proportional to the pseudo-dimension of the ``m``-piece class.

Both rules use the constants bundled in :class:`SelectionConstants`. The
``theory`` preset carries the constants of the risk bounds; ``practical``
replaces them by small values that behave well at moderate sample sizes.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .geometry import sample_design
from .sieve import SieveFitConfig, fit_max_affine, sieve_objective

__all__ = [
    "SelectionConstants", "ModelFamily", "SelectionResult", "pdim_bound",
    "benchmark_cutoff", "penalty", "empirical_contrast", "l_adaptive_select",
    "p_adaptive_select", "p_adaptive_search", "fit_family", "AdaptiveMaxAffineRegressor",
    "CONVEX", "SUPPORT", "LINEAR",
]

CONVEX = "convex_max_affine"
SUPPORT = "support_function"
LINEAR = "linear_sieve"

# absolute constants of the risk bounds
_V = 73728.0
_NORM_CONSTANTS = {
    "d": {"k": 819200.0, "dd": 8.0, "c": 18.0},
    "c": {"k": 7.56e6, "dd": 3.35e5, "c": 1152.0},
}


def _threshold_constant(norm):
    k = _NORM_CONSTANTS[norm]
    return 2.0 * (k["k"] + 4.0 * max(_V, 1.0) * k["dd"])


@dataclass
class SelectionConstants:
    """Constants of the selection rules.

    Parameters
    ----------
    sigma_sq : float
        Noise variance (assumed known).
    gamma : float
        Uniform bound; enters the continuous-norm threshold.
    kappa : float
        Absolute constant of the concentration bounds.
    t_const : dict
        Threshold multiplier per norm, keys ``"c"`` and ``"d"``.
    cp1, cp2 : float
        Penalty constants, ``pen(m) = cp1 sigma^2 D_m / n (cp2 kappa log n + L_m)``.
    L_m : float
        Weight of the model-complexity term in the penalty.
    preset : str
    """

    sigma_sq: float
    gamma: float = math.inf
    kappa: float = 1.0
    t_const: dict = field(default_factory=lambda: {"c": 2.0, "d": 2.0})
    cp1: float = 1.0
    cp2: float = 2.0
    L_m: float = 1.0
    preset: str = "custom"

    def __post_init__(self):
        if not self.sigma_sq > 0:
            raise ValueError("sigma_sq must be positive")
        if not self.kappa > 0 or not self.cp1 > 0 or not self.cp2 > 0:
            raise ValueError("constants must be positive")

    @classmethod
    def theory(cls, sigma_sq, gamma=math.inf, kappa=1.0):
        return cls(sigma_sq, gamma, kappa,
                   {n: _threshold_constant(n) for n in ("c", "d")},
                   16.0, 9.0 * 2 ** 15, 1.0, "theory")

    @classmethod
    def practical(cls, sigma_sq, gamma=math.inf):
        return cls(sigma_sq, gamma, 1.0, {"c": 2.0, "d": 2.0}, 1.0, 2.0, 1.0, "practical")

    @classmethod
    def from_preset(cls, name, sigma_sq, gamma=math.inf):
        if name == "theory":
            return cls.theory(sigma_sq, gamma)
        if name == "practical":
            return cls.practical(sigma_sq, gamma)
        raise ValueError(f"unknown preset {name!r}")

    def scale(self, norm):
        """``sigma^2`` for the discrete norm, ``max(sigma^2, gamma^2)`` otherwise."""
        if norm == "d":
            return self.sigma_sq
        if norm == "c":
            return max(self.sigma_sq, self.gamma ** 2)
        raise ValueError("norm must be 'c' or 'd'")

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class ModelFamily:
    """A nested family of sieves indexed by ``m``."""

    kind: str
    d: int = 1

    def __post_init__(self):
        if self.kind not in (CONVEX, SUPPORT, LINEAR):
            raise ValueError(f"unknown family {self.kind!r}")
        if self.d < 1:
            raise ValueError("d must be positive")


def pdim_bound(family, m):
    """Upper bound ``D_m`` on the pseudo-dimension of the ``m``-th sieve.

    >>> round(pdim_bound(ModelFamily(CONVEX, 1), 1), 6)
    6.591674
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    if family.kind == CONVEX:
        return 6.0 * m * family.d * math.log(3 * m)
    if family.kind == SUPPORT:
        return 3.0 * m * family.d * math.log(3 * m)
    return float(m)


def benchmark_cutoff(family, n):
    """Largest ``m`` the comparison rule inspects.

    ``n^(d/(d+4))`` for convex regression, ``n^((d-1)/(d+3))`` for support
    functions and ``sqrt(n)`` for the linear sieve, floored, clamped to
    ``[1, n]``.
    """
    if n < 1:
        raise ValueError("n must be positive")
    d = family.d
    if family.kind == CONVEX:
        e = d / (d + 4)
    elif family.kind == SUPPORT:
        e = (d - 1) / (d + 3)
    else:
        e = 0.5
    # guard exact powers against rounding down
    c = math.floor(n ** e + 1e-9)
    return int(min(max(c, 1), n))


def penalty(consts, family, m, n):
    """``cp1 sigma^2 D_m / n (cp2 kappa log n + L_m)``."""
    D = pdim_bound(family, m)
    return (consts.cp1 * consts.sigma_sq * D / n
            * (consts.cp2 * consts.kappa * math.log(n) + consts.L_m))


def empirical_contrast(values, responses):
    """``|g|_n^2 - 2 <Y, g>_n``."""
    g = np.asarray(values, dtype=float)
    Y = np.asarray(responses, dtype=float)
    return float(np.mean(g * g) - 2.0 * np.mean(Y * g))


@dataclass
class SelectionResult:
    m_hat: int
    audit: dict

    def to_dict(self):
        return {"m_hat": self.m_hat, "audit": self.audit}


def _threshold(consts, family, m, n, norm):
    return (consts.t_const[norm] * consts.scale(norm) * consts.kappa
            * pdim_bound(family, m) * math.log(n) / n)


def l_adaptive_select(fits, points, consts, family, n, norm="d"):
    """Comparison rule.

    Parameters
    ----------
    fits : dict
        ``m -> callable`` for ``m = 1..cutoff``.
    points : ndarray (k, d)
        Points defining the squared distance: the design for the discrete
        norm, a quadrature sample for the continuous one.
    consts : SelectionConstants
    family : ModelFamily
    n : int
        Sample size entering the threshold.
    norm : {"d", "c"}

    Returns
    -------
    SelectionResult
        ``m_hat`` is the smallest admissible ``m``; the cutoff if none is.
    """
    cutoff = benchmark_cutoff(family, n)
    missing = [m for m in range(1, cutoff + 1) if m not in fits]
    if missing:
        raise ValueError(f"fits missing for m = {missing}")
    vals = {m: np.asarray(fits[m](points), dtype=float) for m in range(1, cutoff + 1)}
    thr = {m: _threshold(consts, family, m, n, norm) for m in range(1, cutoff + 1)}
    dist = {}
    m_hat = None
    for m in range(1, cutoff + 1):
        ok = True
        for mp in range(m, cutoff + 1):
            dv = float(np.mean((vals[m] - vals[mp]) ** 2))
            dist[f"{m},{mp}"] = dv
            if dv > thr[mp]:
                ok = False
        if ok and m_hat is None:
            m_hat = m
    if m_hat is None:
        m_hat = cutoff
    audit = {"rule": "L", "norm": norm, "cutoff": cutoff, "distances": dist,
             "thresholds": {str(m): t for m, t in thr.items()},
             "constants": consts.to_dict()}
    return SelectionResult(m_hat, audit)


def p_adaptive_select(fits, responses, consts, family, n=None):
    """Penalized rule ``argmin_m gamma_n(f_m) + pen(m)``; ties go to smaller ``m``.

    Parameters
    ----------
    fits : dict
        ``m -> fitted values at the design points`` (or ``(values, function)``).
    responses : ndarray (n,)
    """
    Y = np.asarray(responses, dtype=float)
    n = len(Y) if n is None else n
    table = {}
    best, best_crit = None, math.inf
    for m in sorted(fits):
        g = fits[m][0] if isinstance(fits[m], tuple) else fits[m]
        g = np.asarray(g, dtype=float)
        c = empirical_contrast(g, Y)
        p = penalty(consts, family, m, n)
        table[str(m)] = {"contrast": c, "penalty": p, "criterion": c + p}
        if c + p < best_crit:
            best, best_crit = m, c + p
    if best is None:
        raise ValueError("no fits given")
    audit = {"rule": "P", "table": table, "cutoff": benchmark_cutoff(family, n),
             "scanned": [min(fits), max(fits)], "constants": consts.to_dict()}
    return SelectionResult(best, audit)


def fit_family(X, Y, m_values, family, gamma=math.inf, domain=None, seed=0,
               restarts=None, fix_zero=None):
    """Fit nested max-affine sieves for increasing ``m``.

    Each fit is warm-started from the previous one, so the empirical
    objective is nonincreasing in ``m``.

    Returns
    -------
    dict
        ``m -> MaxAffine``.
    """
    fix_zero = family.kind == SUPPORT if fix_zero is None else fix_zero
    fits, prev = {}, None
    for m in m_values:
        cfg = SieveFitConfig(m=m, restarts=restarts, gamma=gamma,
                             fix_intercepts_zero=fix_zero, seed=seed + m)
        prev = fit_max_affine(X, Y, cfg, domain=domain, init=prev)
        fits[m] = prev
    return fits


def p_adaptive_search(X, Y, consts, family, max_m=None, patience=3, domain=None,
                      seed=0, restarts=None, fix_zero=None):
    """Penalized rule over a growing range of ``m``.

    Scans ``m = 1, 2, ...`` past the benchmark cutoff and stops when the
    criterion has not improved for ``patience`` consecutive values, when
    ``max_m`` is reached, or when the penalty alone exceeds the best
    criterion plus ``|Y|_n^2`` (no larger ``m`` can win after that, since
    the contrast is bounded below by ``-|Y|_n^2``).

    Returns
    -------
    SelectionResult, dict
        The result and the fitted functions ``m -> MaxAffine``.
    """
    n = len(Y)
    cutoff = benchmark_cutoff(family, n)
    if max_m is None:
        max_m = max(cutoff, 2 * cutoff + 5)
    max_m = min(max_m, n)
    fix_zero = family.kind == SUPPORT if fix_zero is None else fix_zero
    y_norm = float(np.mean(Y * Y))
    fits, vals, prev = {}, {}, None
    best_crit, since_best, reason = math.inf, 0, "max_m"
    for m in range(1, max_m + 1):
        if penalty(consts, family, m, n) > best_crit + y_norm:
            reason = "penalty_bound"
            break
        cfg = SieveFitConfig(m=m, restarts=restarts, gamma=consts.gamma,
                             fix_intercepts_zero=fix_zero, seed=seed + m)
        prev = fit_max_affine(X, Y, cfg, domain=domain, init=prev)
        fits[m] = prev
        vals[m] = prev(X)
        crit = empirical_contrast(vals[m], Y) + penalty(consts, family, m, n)
        if crit < best_crit:
            best_crit, since_best = crit, 0
        else:
            since_best += 1
        if m >= cutoff and since_best >= patience:
            reason = "patience"
            break
    res = p_adaptive_select(vals, Y, consts, family, n)
    res.audit["stop_reason"] = reason
    res.audit["patience"] = patience
    return res, fits


class AdaptiveMaxAffineRegressor(RegressorMixin, BaseEstimator):
    """Convex regression with a data-driven number of affine pieces.

    Parameters
    ----------
    sigma : float
        Noise standard deviation (assumed known).
    rule : {"P", "L"}, default="P"
        Penalized or comparison rule.
    preset : {"practical", "theory"}, default="practical"
    gamma : float, default=inf
    norm : {"d", "c"}, default="d"
        Norm of the comparison rule. The continuous norm needs ``domain``.
    domain : Polytope or Ball, optional
    max_m : int, optional
        Largest ``m`` scanned by the penalized rule.
    patience : int, default=3
    quad_n : int, default=20000
        Quadrature sample size for the continuous norm.
    random_state : int, default=0

    Attributes
    ----------
    m_hat_ : int
    estimator_ : MaxAffine
    audit_ : dict
    fits_ : dict
    """

    def __init__(self, sigma=1.0, rule="P", preset="practical", gamma=math.inf,
                 norm="d", domain=None, max_m=None, patience=3, quad_n=20_000,
                 random_state=0):
        self.sigma = sigma
        self.rule = rule
        self.preset = preset
        self.gamma = gamma
        self.norm = norm
        self.domain = domain
        self.max_m = max_m
        self.patience = patience
        self.quad_n = quad_n
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        n, d = X.shape
        family = ModelFamily(CONVEX, d)
        consts = SelectionConstants.from_preset(self.preset, self.sigma ** 2, self.gamma)
        if self.rule == "P":
            res, fits = p_adaptive_search(X, y, consts, family, self.max_m, self.patience,
                                          self.domain, self.random_state)
        elif self.rule == "L":
            cutoff = benchmark_cutoff(family, n)
            fits = fit_family(X, y, range(1, cutoff + 1), family, self.gamma,
                              self.domain, self.random_state)
            if self.norm == "c":
                if self.domain is None:
                    raise ValueError("the continuous norm needs a domain")
                pts = sample_design(self.domain, self.quad_n, self.random_state)
            else:
                pts = X
            res = l_adaptive_select(fits, pts, consts, family, n, self.norm)
        else:
            raise ValueError("rule must be 'P' or 'L'")
        self.m_hat_ = res.m_hat
        self.estimator_ = fits[res.m_hat]
        self.audit_ = res.audit
        self.fits_ = fits
        self.train_objective_ = sieve_objective(self.estimator_, X, y)
        self.n_features_in_ = d
        return self

    def predict(self, X):
        check_is_fitted(self, "estimator_")
        return self.estimator_(check_array(X))
