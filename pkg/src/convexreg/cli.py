"""Command-line interface.

Exit codes: 0 on success, 1 when an estimation step fails (solver failure,
invalid data), 2 on usage or configuration errors. Results go to the output
file (or standard output); diagnostics go to standard error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys

import numpy as np

from . import __version__
from .blse import BlseSpec, SolverError, counterexample_lse_d1, fit_blse
from .geometry import Polytope, domain_from_dict
from .harness import ExperimentConfig, ExperimentError, run_experiment
from .jsonio import dumps, parse_float
from .selection import (CONVEX, SUPPORT, ModelFamily, SelectionConstants,
                        benchmark_cutoff, fit_family, l_adaptive_select,
                        p_adaptive_search)
from .sieve import SieveFitConfig
from .supportfn import SupportSample, adaptive_set_estimate, fit_polytope_support

logger = logging.getLogger("convexreg")

CONFIG_VERSION = 1


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


# key -> (description, default); "required" marks keys without a default
CONFIG_KEYS = {
    "fit": {
        "version": ("config format version, must be 1", "required"),
        "data": ("CSV path: feature columns then the response", "required"),
        "gamma": ("uniform bound, number or \"inf\"", "inf"),
        "domain": ("{\"kind\": \"polytope\", \"vertices\", \"simplices\"} or "
                   "{\"kind\": \"ball\", \"center\", \"radius\"}; default: bounding box", None),
        "tol": ("QP residual tolerance", 1e-6),
        "method": ("QP method: auto | active-set | admm", "auto"),
    },
    "fit-set": {
        "version": ("config format version, must be 1", "required"),
        "data": ("CSV path: unit direction columns then the support value", "required"),
        "m": ("vertex budget; null selects it from the data", None),
        "sigma": ("noise standard deviation (for selection)", 1.0),
        "rule": ("selection rule: P | L", "P"),
        "preset": ("selection constants: practical | theory", "practical"),
        "gamma": ("radius of a ball containing the set, number or \"inf\"", "inf"),
    },
    "select": {
        "version": ("config format version, must be 1", "required"),
        "data": ("CSV path: feature columns then the response", "required"),
        "family": ("convex_max_affine | support_function", "convex_max_affine"),
        "rule": ("selection rule: P | L", "P"),
        "preset": ("selection constants: practical | theory", "practical"),
        "sigma": ("noise standard deviation", "required"),
        "gamma": ("uniform bound, number or \"inf\"", "inf"),
        "norm": ("distance of the L rule: d (design) | c (needs domain)", "d"),
        "domain": ("domain for the continuous norm and the gamma clip", None),
        "max_m": ("largest m scanned by the P rule", None),
        "patience": ("P rule stops after this many non-improving m", 3),
        "quad_n": ("quadrature size for the continuous norm", 20000),
    },
    "simulate": {
        "version": ("config format version, must be 1", "required"),
        "domain": ("domain object (see fit)", "required"),
        "truth": ("{\"kind\": \"quadratic\", \"Q\", \"c\", \"r\"} | {\"kind\": \"max_affine\", "
                  "\"slopes\", \"intercepts\"} | {\"kind\": \"polytope\", \"vertices\"}",
                  "required"),
        "noise_sigma": ("Gaussian noise standard deviation", "required"),
        "n_grid": ("list of sample sizes", "required"),
        "reps": ("replicates per sample size", "required"),
        "estimator": ("{\"kind\": blse | sieve | l_adaptive | p_adaptive | linear_sieve | "
                      "support_p | support_l, ...options}", "required"),
        "norms": ("losses to record, subset of [\"c\", \"d\"]", ["c", "d"]),
        "quad_n": ("quadrature size for the continuous loss", 20000),
        "seed": ("base seed", 0),
        "design": ("random | fixed (equispaced on [0, 1])", "random"),
        "n_jobs": ("parallel workers; default: logical cores", None),
    },
}
CONFIG_KEYS["rates"] = CONFIG_KEYS["simulate"]

BUILTIN_EXPERIMENTS = {
    "blse-d1": {
        "version": 1, "domain": {"kind": "polytope", "vertices": [[0.0], [1.0]],
                                 "simplices": [[0, 1]]},
        "truth": {"kind": "quadratic", "Q": [[1.0]]}, "noise_sigma": 1.0,
        "n_grid": [50, 100, 200, 400], "reps": 30,
        "estimator": {"kind": "blse", "gamma": 2.0}, "norms": ["c", "d"],
    },
    "lse-fixed-d1": {
        "version": 1, "domain": {"kind": "polytope", "vertices": [[0.0], [1.0]],
                                 "simplices": [[0, 1]]},
        "truth": {"kind": "quadratic", "Q": [[1.0]]}, "noise_sigma": 1.0,
        "n_grid": [50, 100, 200, 400], "reps": 30, "design": "fixed",
        "estimator": {"kind": "blse", "gamma": "inf"}, "norms": ["d"],
    },
}


def _load_config(path, command):
    if path is None:
        raise ConfigError("--config is required for this subcommand")
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return _check_config(cfg, command)


def _check_config(cfg, command):
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    if cfg.get("version") != CONFIG_VERSION:
        raise ConfigError(f"config version must be {CONFIG_VERSION}")
    keys = CONFIG_KEYS[command]
    unknown = sorted(set(cfg) - set(keys))
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")
    missing = sorted(k for k, (_, default) in keys.items()
                     if default == "required" and k not in cfg)
    if missing:
        raise ConfigError(f"missing config keys: {missing}")
    out = {k: default for k, (_, default) in keys.items() if default != "required"}
    out.update(cfg)
    return out


def _read_csv(path):
    if not os.path.exists(path):
        raise ConfigError(f"data file not found: {path}")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError("empty data file")
    try:
        float(rows[0][0])
    except ValueError:
        rows = rows[1:]
    data = np.array([[float(v) for v in r] for r in rows if r])
    if data.ndim != 2 or data.shape[1] < 2:
        raise ValueError("data needs at least one feature column and a response")
    return data[:, :-1], data[:, -1]


def _write(text, path):
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _domain(spec, X=None):
    if spec is not None:
        return domain_from_dict(spec)
    if X is None:
        return None
    lo, hi = X.min(axis=0), X.max(axis=0)
    hi = np.where(hi > lo, hi, lo + 1.0)
    if X.shape[1] == 1:
        return Polytope.interval(lo[0], hi[0])
    cube = Polytope.hypercube(X.shape[1])
    return Polytope(lo + cube.vertices * (hi - lo), cube.simplices, check_samples=0)


def cmd_fit(args, cfg):
    X, Y = _read_csv(cfg["data"])
    gamma = parse_float(cfg["gamma"])
    dom = _domain(cfg["domain"], X if math.isfinite(gamma) else None)
    fit = fit_blse(BlseSpec(X, Y, gamma, dom), tol=float(cfg["tol"]), method=cfg["method"])
    _write(dumps({"version": CONFIG_VERSION, "fit": fit.to_dict()}), args.output)


def cmd_fit_set(args, cfg):
    U, Y = _read_csv(cfg["data"])
    sample = SupportSample(U / np.linalg.norm(U, axis=1, keepdims=True), Y)
    gamma = parse_float(cfg["gamma"])
    if cfg["m"] is not None:
        sc = SieveFitConfig(m=int(cfg["m"]), gamma=gamma, seed=args.seed or 0)
        K = fit_polytope_support(sample, int(cfg["m"]), sc)
        audit = {"m_hat": int(cfg["m"])}
    else:
        preset = args.preset or cfg["preset"]
        consts = SelectionConstants.from_preset(preset, float(cfg["sigma"]) ** 2, gamma)
        K, audit = adaptive_set_estimate(sample, consts, cfg["rule"], seed=args.seed or 0)
    _write(dumps({"version": CONFIG_VERSION, "vertices": K.vertices,
                  "hull_vertices": K.hull_vertices(), "audit": audit}), args.output)


def cmd_select(args, cfg):
    X, Y = _read_csv(cfg["data"])
    n, d = X.shape
    kind = cfg["family"]
    if kind not in (CONVEX, SUPPORT):
        raise ConfigError(f"family must be {CONVEX} or {SUPPORT}")
    family = ModelFamily(kind, d)
    preset = args.preset or cfg["preset"]
    gamma = parse_float(cfg["gamma"])
    consts = SelectionConstants.from_preset(preset, float(cfg["sigma"]) ** 2, gamma)
    dom = _domain(cfg["domain"]) if cfg["domain"] is not None else None
    seed = args.seed or 0
    if cfg["rule"] == "P":
        res, fits = p_adaptive_search(X, Y, consts, family, cfg["max_m"], cfg["patience"],
                                      dom, seed)
    elif cfg["rule"] == "L":
        fits = fit_family(X, Y, range(1, benchmark_cutoff(family, n) + 1), family,
                          gamma, dom, seed)
        if cfg["norm"] == "c":
            if dom is None:
                raise ConfigError("the continuous norm needs a domain")
            pts = dom.sample(int(cfg["quad_n"]), np.random.default_rng(seed))
        else:
            pts = X
        res = l_adaptive_select(fits, pts, consts, family, n, cfg["norm"])
    else:
        raise ConfigError("rule must be P or L")
    f = fits[res.m_hat]
    out = {"version": CONFIG_VERSION, "m_hat": res.m_hat, "audit": res.audit,
           "estimator": {"slopes": f.slopes, "intercepts": f.intercepts}}
    _write(dumps(out), args.output)


def _experiment(args, cfg):
    cfg = dict(cfg)
    cfg.pop("version")
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.reps is not None:
        cfg["reps"] = args.reps
    if args.preset is not None:
        cfg["estimator"] = dict(cfg["estimator"], preset=args.preset)
    if cfg["n_jobs"] is None:
        cfg["n_jobs"] = os.cpu_count() or 1
    try:
        ecfg = ExperimentConfig(**cfg)
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc
    return run_experiment(ecfg)


def cmd_simulate(args, cfg):
    report = _experiment(args, cfg)
    _write(dumps(report.to_dict()), args.output)
    if args.output is not None:
        base = os.path.splitext(args.output)[0]
        with open(base + ".csv", "w") as fh:
            fh.write(report.to_csv())


def cmd_rates(args, cfg):
    report = _experiment(args, cfg)
    out = {"version": report.to_dict()["version"], "config": report.config,
           "summary": report.summary, "exponent": report.exponents,
           "failures": report.failures}
    _write(dumps(out), args.output)


def cmd_demo(args, cfg):
    closed, fit = counterexample_lse_d1()
    grid = np.linspace(0.0, 0.75, 16)
    fitted = fit.predict(grid[:, None])
    exact = closed(grid)
    gap = float(np.max(np.abs(fitted - exact)))
    _, bounded = counterexample_lse_d1(gamma=1.0)
    out = {"version": CONFIG_VERSION, "grid": grid, "closed_form": exact,
           "fitted": fitted, "max_abs_gap": gap,
           "fitted_at_zero": float(fit.predict([[0.0]])[0]),
           "bounded_fit_at_zero": float(bounded.predict([[0.0]])[0])}
    _write(dumps(out), args.output)
    print(f"max abs gap on [0, 0.75]: {gap:.3e}", file=sys.stderr)


COMMANDS = {
    "fit": (cmd_fit, "bounded least-squares convex fit of CSV data"),
    "fit-set": (cmd_fit_set, "polytope estimate from support-function data"),
    "select": (cmd_select, "adaptive choice of the number of affine pieces"),
    "simulate": (cmd_simulate, "Monte Carlo risk experiment (JSON and CSV)"),
    "rates": (cmd_rates, "Monte Carlo experiment reporting rate exponents"),
    "demo-counterexample": (cmd_demo, "six-point example of an unbounded fit"),
}


def _epilog(command):
    if command not in CONFIG_KEYS:
        return "This subcommand takes no config file."
    lines = ["config keys (JSON object):"]
    for key, (desc, default) in CONFIG_KEYS[command].items():
        dflt = "required" if default == "required" else f"default {json.dumps(default)}"
        lines.append(f"  {key:<12} {desc} ({dflt})")
    if command in ("simulate", "rates"):
        lines.append("builtin experiments for --experiment: "
                     + ", ".join(sorted(BUILTIN_EXPERIMENTS)))
    return "\n".join(lines)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="convexreg", description="Convex regression and convex set estimation.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", metavar="subcommand")
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text,
                           epilog=_epilog(name),
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        if name != "demo-counterexample":
            p.add_argument("--config", help="JSON config file")
        p.add_argument("--output", "-o", help="output path (default: standard output)")
        p.add_argument("--seed", type=int, help="seed override")
        p.add_argument("--preset", choices=["theory", "practical"],
                       help="selection constants override")
        p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
        if name in ("simulate", "rates"):
            p.add_argument("--experiment", choices=sorted(BUILTIN_EXPERIMENTS),
                           help="use a builtin experiment instead of --config")
            p.add_argument("--reps", type=int, help="replicate count override")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    func = COMMANDS[args.command][0]
    try:
        if args.command == "demo-counterexample":
            cfg = None
        elif getattr(args, "experiment", None) and args.config is None:
            cfg = _check_config(dict(BUILTIN_EXPERIMENTS[args.experiment]), args.command)
        else:
            cfg = _load_config(args.config, args.command)
        func(args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (SolverError, ExperimentError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


dispatch = main


if __name__ == "__main__":
    sys.exit(main())
