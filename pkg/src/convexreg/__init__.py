"""Convex regression with bounded least squares, max-affine sieves and
adaptive model selection, plus convex set estimation from support functions.
"""

__version__ = "0.1.0"

from .blse import BlseFit, BlseSpec, ConvexRegressor, SolverError, fit_blse
from .funcspace import MaxAffine, Quadratic, l2_disc_sq, l2_nu_sq
from .geometry import Ball, Cap, Polytope, disjoint_caps, sample_design
from .harness import ExperimentConfig, RiskReport, fit_rate_exponent, run_experiment
from .qp import QpProblem, QpSolution, QpStatus, solve_qp
from .selection import (AdaptiveMaxAffineRegressor, ModelFamily, SelectionConstants,
                        benchmark_cutoff, l_adaptive_select, p_adaptive_select,
                        pdim_bound)
from .sieve import MaxAffineRegressor, SieveFitConfig, fit_max_affine
from .supportfn import (PolytopeEstimate, SupportFunctionEstimator, SupportSample,
                        fit_polytope_support)

__all__ = [
    "AdaptiveMaxAffineRegressor", "Ball", "BlseFit", "BlseSpec", "Cap",
    "ConvexRegressor", "ExperimentConfig", "MaxAffine", "MaxAffineRegressor",
    "ModelFamily", "Polytope", "PolytopeEstimate", "QpProblem", "QpSolution",
    "QpStatus", "Quadratic", "RiskReport", "SelectionConstants", "SieveFitConfig",
    "SolverError", "SupportFunctionEstimator", "SupportSample", "benchmark_cutoff",
    "disjoint_caps", "fit_blse", "fit_max_affine", "fit_polytope_support",
    "fit_rate_exponent", "l2_disc_sq", "l2_nu_sq", "l_adaptive_select",
    "p_adaptive_select", "pdim_bound", "run_experiment", "sample_design", "solve_qp",
]
