"""Monte Carlo risk experiments and empirical rate exponents.

Every replicate draws its design and noise from a generator seeded by
``(seed, n, rep)``, so estimators compared under the same configuration see
identical data sets, and reruns are bit-for-bit reproducible.
"""

from __future__ import annotations

import csv
import hashlib
import io
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from joblib import Parallel, delayed
from scipy import stats

from .blse import BlseSpec, SolverError, fit_blse
from .funcspace import MaxAffine, Quadratic, l2_disc_sq
from .geometry import Polytope, domain_from_dict, sample_design, sample_sphere
from .selection import (CONVEX, LINEAR, ModelFamily, SelectionConstants,
                        benchmark_cutoff, fit_family, l_adaptive_select,
                        p_adaptive_search)
from .sieve import SieveFitConfig, fit_linear_sieve, fit_max_affine
from .supportfn import PolytopeEstimate, SupportSample, adaptive_set_estimate

logger = logging.getLogger(__name__)

__all__ = [
    "ExperimentConfig", "RiskReport", "ExperimentError", "run_experiment",
    "fit_rate_exponent", "fixed_design_experiment_d1", "truth_from_dict",
    "fixed_design_d1", "dataset_digest", "FORMAT_VERSION",
]

FORMAT_VERSION = 1
# mean risks below this are rounding noise; no exponent is fitted
ZERO_RISK = 1e-20
ESTIMATORS = ("blse", "sieve", "l_adaptive", "p_adaptive", "linear_sieve", "support_p",
              "support_l")


class ExperimentError(RuntimeError):
    """Too many replicates failed."""


def truth_from_dict(spec):
    """Build a truth function from a JSON description.

    Supported kinds: ``quadratic`` (``Q``, ``c``, ``r``), ``max_affine``
    (``slopes``, ``intercepts``) and ``polytope`` (``vertices``, a support
    function).
    """
    kind = spec.get("kind")
    if kind == "quadratic":
        return Quadratic(spec["Q"], spec.get("c"), spec.get("r", 0.0))
    if kind == "max_affine":
        return MaxAffine(spec["slopes"], spec["intercepts"])
    if kind == "polytope":
        return PolytopeEstimate(spec["vertices"])
    raise ValueError(f"unknown truth kind {kind!r}")


@dataclass
class ExperimentConfig:
    """One Monte Carlo experiment.

    Parameters
    ----------
    domain : Polytope or Ball
        Design support. Ignored by the support-function estimators, which
        draw uniform directions on the sphere.
    truth : callable or dict
    noise_sigma : float
    n_grid : list of int
    reps : int
    estimator : dict
        ``{"kind": ..., ...}``. Kinds: ``blse`` (``gamma``), ``sieve``
        (``m``: int or ``"cutoff"``), ``l_adaptive`` / ``p_adaptive``
        (``preset``, ``gamma``), ``linear_sieve`` (``m``), ``support_p`` /
        ``support_l`` (``preset``).
    norms : list of {"c", "d"}
    quad_n : int
        Quadrature sample size for the continuous loss.
    seed : int
    design : {"random", "fixed"}
        ``fixed`` uses the grid ``(k-1)/(n-1)`` on ``[0, 1]``.
    n_jobs : int
    """

    domain: object
    truth: object
    noise_sigma: float
    n_grid: list
    reps: int
    estimator: dict
    norms: list = field(default_factory=lambda: ["c", "d"])
    quad_n: int = 20_000
    seed: int = 0
    design: str = "random"
    n_jobs: int = 1

    def __post_init__(self):
        if isinstance(self.truth, dict):
            self.truth = truth_from_dict(self.truth)
        if isinstance(self.domain, dict):
            self.domain = domain_from_dict(self.domain)
        if self.reps < 1 or not self.n_grid or min(self.n_grid) < 2:
            raise ValueError("need reps >= 1 and sample sizes >= 2")
        if any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ValueError("n_grid must be strictly increasing")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")
        if self.estimator.get("kind") not in ESTIMATORS:
            raise ValueError(f"unknown estimator {self.estimator.get('kind')!r}")
        if set(self.norms) - {"c", "d"}:
            raise ValueError("norms must be 'c' or 'd'")
        if self.design not in ("random", "fixed"):
            raise ValueError("design must be 'random' or 'fixed'")
        if self.design == "fixed" and self.domain.dim != 1:
            raise ValueError("the fixed design is one-dimensional")

    @property
    def is_support(self):
        return self.estimator["kind"].startswith("support")


def fixed_design_d1(n):
    """Equispaced design ``x_k = (k-1)/(n-1)``, ``k = 1..n``."""
    return np.linspace(0.0, 1.0, n)[:, None]


def dataset_digest(X, Y):
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(X, dtype=float).tobytes())
    h.update(np.ascontiguousarray(Y, dtype=float).tobytes())
    return h.hexdigest()[:16]


def _gamma(spec):
    g = spec.get("gamma", math.inf)
    return math.inf if g is None or g == "inf" else float(g)


def _fit(cfg, X, Y, seed):
    """Fit the configured estimator; returns a vectorized callable."""
    est = cfg.estimator
    kind = est["kind"]
    n, d = X.shape
    sigma_sq = max(cfg.noise_sigma ** 2, 1e-12)
    if kind == "blse":
        spec = BlseSpec(X, Y, _gamma(est), cfg.domain)
        return fit_blse(spec, tol=est.get("tol", 1e-6)).estimator, {}
    if kind == "sieve":
        m = est.get("m", "cutoff")
        m = benchmark_cutoff(ModelFamily(CONVEX, d), n) if m == "cutoff" else int(m)
        sc = SieveFitConfig(m=m, gamma=_gamma(est), seed=seed)
        return fit_max_affine(X, Y, sc, domain=cfg.domain), {"m": m}
    if kind == "linear_sieve":
        m = est.get("m", "cutoff")
        m = benchmark_cutoff(ModelFamily(LINEAR, 1), n) if m == "cutoff" else int(m)
        return fit_linear_sieve(X[:, 0], Y, m), {"m": m}
    if kind in ("l_adaptive", "p_adaptive"):
        consts = SelectionConstants.from_preset(est.get("preset", "practical"), sigma_sq,
                                                _gamma(est))
        family = ModelFamily(CONVEX, d)
        if kind == "p_adaptive":
            res, fits = p_adaptive_search(X, Y, consts, family, est.get("max_m"),
                                          est.get("patience", 3), cfg.domain, seed)
        else:
            norm = est.get("norm", "d")
            fits = fit_family(X, Y, range(1, benchmark_cutoff(family, n) + 1), family,
                              consts.gamma, cfg.domain, seed)
            pts = X if norm == "d" else sample_design(cfg.domain, cfg.quad_n, seed)
            res = l_adaptive_select(fits, pts, consts, family, n, norm)
        return fits[res.m_hat], {"m": res.m_hat}
    if kind in ("support_p", "support_l"):
        consts = SelectionConstants.from_preset(est.get("preset", "practical"), sigma_sq,
                                                _gamma(est))
        K, audit = adaptive_set_estimate(SupportSample(X, Y), consts,
                                         "P" if kind == "support_p" else "L",
                                         norm=est.get("norm", "d"), seed=seed)
        return K, {"m": audit["m_hat"]}
    raise ValueError(f"unknown estimator {kind!r}")


def _draw(cfg, n, rep):
    rng = np.random.default_rng([cfg.seed, n, rep])
    if cfg.is_support:
        X = sample_sphere(n, cfg.truth.dim, rng=rng)
    elif cfg.design == "fixed":
        X = fixed_design_d1(n)
    else:
        X = sample_design(cfg.domain, n, rng)
    Y = cfg.truth(X) + cfg.noise_sigma * rng.standard_normal(n)
    return X, Y


def _quadrature(cfg, n):
    if "c" not in cfg.norms:
        return None
    rng = np.random.default_rng([cfg.seed, n, 2 ** 31])
    if cfg.is_support:
        return sample_sphere(cfg.quad_n, cfg.truth.dim, rng=rng)
    return sample_design(cfg.domain, cfg.quad_n, rng)


def _replicate(cfg, n, rep, quad):
    X, Y = _draw(cfg, n, rep)
    digest = dataset_digest(X, Y)
    try:
        f, info = _fit(cfg, X, Y, seed=rep)
    except (SolverError, np.linalg.LinAlgError) as exc:
        logger.warning("n=%d rep=%d failed: %s", n, rep, exc)
        return {"n": n, "rep": rep, "failed": True, "error": str(exc), "digest": digest}
    row = {"n": n, "rep": rep, "failed": False, "digest": digest}
    row.update(info)
    if "d" in cfg.norms:
        row["loss_d"] = l2_disc_sq(f(X), cfg.truth(X))
    if "c" in cfg.norms:
        row["loss_c"] = l2_disc_sq(f(quad), cfg.truth(quad))
    return row


def fit_rate_exponent(ns, risks):
    """Least-squares slope of ``log risk`` on ``log n``.

    Returns
    -------
    slope, stderr : float
    """
    ns = np.asarray(ns, dtype=float)
    risks = np.asarray(risks, dtype=float)
    if np.any(risks <= 0) or np.any(ns <= 0):
        raise ValueError("sample sizes and risks must be positive")
    if len(ns) < 2:
        raise ValueError("need at least two sample sizes")
    res = stats.linregress(np.log(ns), np.log(risks))
    stderr = float(res.stderr) if len(ns) > 2 else 0.0
    return float(res.slope), stderr


@dataclass
class RiskReport:
    """Per-replicate losses with summaries and fitted exponents."""

    config: dict
    records: list
    summary: list = field(default_factory=list)
    exponents: dict = field(default_factory=dict)
    failures: int = 0

    def __post_init__(self):
        if not self.summary:
            self._summarize()

    def _summarize(self):
        ok = [r for r in self.records if not r["failed"]]
        self.failures = len(self.records) - len(ok)
        ns = sorted({r["n"] for r in self.records})
        for norm in ("c", "d"):
            key = f"loss_{norm}"
            if not any(key in r for r in ok):
                continue
            means = []
            for n in ns:
                v = np.array([r[key] for r in ok if r["n"] == n])
                mean = float(v.mean()) if len(v) else math.nan
                se = float(v.std(ddof=1) / math.sqrt(len(v))) if len(v) > 1 else math.nan
                self.summary.append({"n": n, "norm": norm, "mean": mean, "se": se,
                                     "count": int(len(v))})
                means.append(mean)
            means = np.array(means)
            if np.all(np.isfinite(means)) and np.max(means) <= ZERO_RISK:
                self.exponents[norm] = {"slope": None, "stderr": None,
                                        "flag": "risk at numerical zero"}
            elif np.all(np.isfinite(means)) and np.all(means > 0) and len(ns) >= 2:
                slope, se = fit_rate_exponent(ns, means)
                self.exponents[norm] = {"slope": slope, "stderr": se, "flag": None}
            else:
                self.exponents[norm] = {"slope": None, "stderr": None,
                                        "flag": "nonpositive or missing risk"}

    def mean_risk(self, norm):
        return [s["mean"] for s in self.summary if s["norm"] == norm]

    def exponent(self, norm):
        return self.exponents[norm]["slope"]

    def to_dict(self):
        return {"version": FORMAT_VERSION, "config": self.config,
                "summary": self.summary, "exponents": self.exponents,
                "failures": self.failures, "records": self.records}

    def to_csv(self):
        """Long format ``n, norm, rep, loss`` for external plotting."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "norm", "rep", "loss"])
        for r in self.records:
            for norm in ("c", "d"):
                key = f"loss_{norm}"
                if key in r:
                    w.writerow([r["n"], norm, r["rep"], f"{r[key]:.17g}"])
        return buf.getvalue()


def _describe(cfg):
    truth = cfg.truth
    if isinstance(truth, MaxAffine):
        t = {"kind": "max_affine", "slopes": truth.slopes.tolist(),
             "intercepts": truth.intercepts.tolist()}
    elif isinstance(truth, Quadratic):
        t = {"kind": "quadratic", "Q": truth.Q.tolist(), "c": truth.c.tolist(),
             "r": truth.r}
    elif isinstance(truth, PolytopeEstimate):
        t = {"kind": "polytope", "vertices": truth.vertices.tolist()}
    else:
        t = {"kind": type(truth).__name__}
    out = {k: v for k, v in asdict(cfg).items() if k not in ("domain", "truth")}
    out["domain"] = cfg.domain.to_dict() if cfg.domain is not None else None
    out["truth"] = t
    out["estimator"] = {k: (str(v) if isinstance(v, float) and not math.isfinite(v) else v)
                        for k, v in cfg.estimator.items()}
    return out


def run_experiment(cfg, max_failure_rate=0.10):
    """Run all replicates and summarize.

    Raises
    ------
    ExperimentError
        If more than ``max_failure_rate`` of the replicates fail.
    """
    tasks = []
    quads = {n: _quadrature(cfg, n) for n in cfg.n_grid}
    for n in cfg.n_grid:
        for rep in range(cfg.reps):
            tasks.append((n, rep))
    if cfg.n_jobs == 1:
        records = [_replicate(cfg, n, rep, quads[n]) for n, rep in tasks]
    else:
        records = Parallel(n_jobs=cfg.n_jobs)(
            delayed(_replicate)(cfg, n, rep, quads[n]) for n, rep in tasks)
    report = RiskReport(_describe(cfg), records)
    if report.failures > max_failure_rate * len(records):
        raise ExperimentError(f"{report.failures} of {len(records)} replicates failed")
    return report


def fixed_design_experiment_d1(n_grid, truth, noise_sigma, reps, seed=0, n_jobs=1):
    """Unconstrained least squares on the equispaced grid, discrete loss only."""
    cfg = ExperimentConfig(Polytope.interval(0.0, 1.0), truth, noise_sigma, list(n_grid),
                           reps, {"kind": "blse", "gamma": math.inf}, norms=["d"],
                           seed=seed, design="fixed", n_jobs=n_jobs)
    return run_experiment(cfg)

