"""Command-line entry point: ``hdci ci | simulate | lb | re``.

Exit codes: 0 on success, 2 for configuration or input errors, 3 for solver
failures (for ``simulate``: a cell whose failure fraction exceeds the
configured ceiling).
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import os
import sys

import numpy as np

from .certificates import (REMode, c1_constant, c2_constant, column_norm_ratio,
                           omega_surrogate, restricted_eigenvalue)
from .core import Dataset
from .errors import ConfigError, SolverError
from .intervals import CIConfig, Mode, ci_dense, ci_known_design, ci_sparse
from .lower_bounds import (adaptivity_lower_curve, adaptivity_spec, chisq_mixture,
                           separation_gap, tv_upper_from_chisq)
from .simulate import SCHEMA_VERSION, ExperimentConfig, default_threads, run_experiment

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3

LB_HEADER = ("n", "p", "k", "k1", "alpha", "zeta0", "sigma", "m", "rho", "chisq", "tv",
             "gap", "bound")


def read_matrix(path: str) -> np.ndarray:
    try:
        return np.loadtxt(path, delimiter=",", ndmin=2, dtype=float)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read matrix {path}: {exc}") from exc


def read_vector(path: str) -> np.ndarray:
    try:
        return np.loadtxt(path, delimiter=",", ndmin=1, dtype=float).reshape(-1)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read vector {path}: {exc}") from exc


def read_json(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def _emit(obj: dict, out) -> None:
    out.write(json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n")


def _ci_config(args) -> CIConfig:
    cfg = CIConfig.from_dict(read_json(args.config)) if args.config else CIConfig()
    if args.mode:
        cfg = cfg.replace(mode=Mode(args.mode))
    if args.k is not None:
        cfg = cfg.replace(k=args.k)
    if args.alpha is not None:
        cfg = cfg.replace(alpha=args.alpha)
    return cfg


def cmd_ci(args, out) -> int:
    data = Dataset(x=read_matrix(args.x), y=read_vector(args.y))
    xi = read_vector(args.xi)
    cfg = _ci_config(args)
    if args.interval == "sparse":
        res = ci_sparse(data, xi, cfg)
    elif args.interval == "dense":
        res = ci_dense(data, xi, cfg)
    else:
        if args.sigma0 is None:
            raise ConfigError("known_design needs --sigma0")
        res = ci_known_design(data, xi, args.sigma0, cfg, seed=args.seed)
    _emit({"schema_version": SCHEMA_VERSION, **res.to_dict()}, out)
    return EXIT_OK


def cmd_simulate(args, out) -> int:
    cfg = ExperimentConfig.from_dict(read_json(args.config))
    if args.mode:
        cfg = cfg.replace(ci=cfg.ci.replace(mode=Mode(args.mode)))
    report = run_experiment(cfg, threads=args.threads or default_threads())
    paths = report.write(args.out)
    for c in report.cells:
        label = "-" if c.swept_value is None else c.swept_value
        out.write(f"cell {label}: coverage {c.coverage:.4f} "
                  f"[{c.wilson_interval[0]:.4f}, {c.wilson_interval[1]:.4f}] "
                  f"mean length {c.mean_length:.6g} failures {c.failure_fraction:.4f}\n")
    out.write(f"wrote {paths['report.json']}\n")
    if report.max_failure_fraction > cfg.max_failure_fraction:
        sys.stderr.write(f"failure fraction {report.max_failure_fraction:.4f} exceeds "
                         f"ceiling {cfg.max_failure_fraction}\n")
        return EXIT_SOLVER
    return EXIT_OK


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def lb_rows(grid: dict) -> list[list]:
    ns = grid.get("n", [400])
    ps = grid.get("p", [2000])
    ks = grid.get("k", [10])
    k1 = int(grid.get("k1", 0))
    alpha = float(grid.get("alpha", 0.05))
    zeta0 = float(grid.get("zeta0", 0.5))
    sigma = float(grid.get("sigma", 1.0))
    rows = []
    for n, p, k in itertools.product(ns, ps, ks):
        spec = adaptivity_spec(int(n), int(p), int(k), k1, zeta0, sigma)
        chisq = chisq_mixture(spec)
        rows.append([int(n), int(p), int(k), k1, alpha, zeta0, sigma, spec.m, spec.rho, chisq,
                     tv_upper_from_chisq(chisq), separation_gap(spec),
                     adaptivity_lower_curve(int(n), int(p), int(k), k1, alpha, zeta0, sigma)])
    return rows


def cmd_lb(args, out) -> int:
    grid = read_json(args.config) if args.config else {}
    for key in ("n", "p", "k"):
        val = getattr(args, key)
        if val:
            grid[key] = _int_list(val)
    rows = lb_rows(grid)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "lb.csv")
        fh = open(path, "w", newline="", encoding="utf-8")
    else:
        fh = out
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LB_HEADER)
        w.writerows([[repr(v) if isinstance(v, float) else v for v in r] for r in rows])
    finally:
        if fh is not out:
            fh.close()
    return EXIT_OK


def cmd_re(args, out) -> int:
    x = read_matrix(args.x)
    data = Dataset(x=x, y=np.zeros(x.shape[0]))
    est = restricted_eigenvalue(data, args.k, args.alpha0, REMode(args.re_mode), seed=args.seed)
    kappa_sq = est.value ** 2
    report = {"schema_version": SCHEMA_VERSION, "k": args.k, "alpha0": args.alpha0,
              "mode": est.mode.value, "kappa": est.value, "kappa_sq": kappa_sq,
              "support": list(est.certificate[0]), "column_norm_ratio": column_norm_ratio(data)}
    if kappa_sq > 0:
        report["c1"] = c1_constant(data, args.k, kappa_sq, args.m1)
        report["c2"] = c2_constant(data, args.k, kappa_sq)
    if args.omega_eigs:
        om = omega_surrogate(args.omega_eigs[0], args.omega_eigs[1], data, args.k,
                             plug_in=True)
        report["omega"] = om.value
    _emit(report, out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hdci", description=(
        "Confidence intervals for linear functionals in high-dimensional regression."))
    sub = parser.add_subparsers(dest="command", required=True)
    modes = [m.value for m in Mode]

    p = sub.add_parser("ci", help="interval for one dataset read from CSV files")
    p.add_argument("--x", required=True, help="design matrix CSV, one observation per row")
    p.add_argument("--y", required=True, help="response CSV, one value per line")
    p.add_argument("--xi", required=True, help="loading CSV, one value per line")
    p.add_argument("--interval", choices=("sparse", "dense", "known_design"),
                   default="sparse")
    p.add_argument("--config", help="CI settings JSON")
    p.add_argument("--mode", choices=modes)
    p.add_argument("--k", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--sigma0", type=float, help="known noise level (known_design)")
    p.add_argument("--seed", type=int, default=0, help="sample-split seed (known_design)")
    p.set_defaults(func=cmd_ci)

    p = sub.add_parser("simulate", help="Monte Carlo coverage experiment")
    p.add_argument("--config", required=True, help="experiment JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")
    p.add_argument("--mode", choices=modes)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("lb", help="lower-bound curve over a grid, as CSV")
    p.add_argument("--config", help="grid JSON with lists n, p, k and scalars k1, alpha, "
                                    "zeta0, sigma")
    p.add_argument("--n", help="comma-separated sample sizes")
    p.add_argument("--p", help="comma-separated dimensions")
    p.add_argument("--k", help="comma-separated sparsities")
    p.add_argument("--out", help="output directory (default: standard output)")
    p.set_defaults(func=cmd_lb)

    p = sub.add_parser("re", help="restricted-eigenvalue and omega report for a design")
    p.add_argument("--x", required=True, help="design matrix CSV")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--alpha0", type=float, default=1.0)
    p.add_argument("--re-mode", choices=[m.value for m in REMode],
                   default=REMode.HEURISTIC_UPPER.value)
    p.add_argument("--omega-eigs", type=float, nargs=2, metavar=("LMIN", "LMAX"))
    p.add_argument("--m1", type=float, default=1.5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_re)
    return parser


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    if getattr(args, "threads", None) is not None and args.threads < 1:
        sys.stderr.write("error: --threads must be at least 1\n")
        return EXIT_CONFIG
    try:
        return args.func(args, out)
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return EXIT_CONFIG
    except SolverError as exc:
        sys.stderr.write(f"solver failure: {exc}\n")
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
