"""Command-line front door: validate | solve | sweep | bounds.

All experiment inputs come from a YAML config (every key optional; see
config module) plus a handful of override flags. Outputs are deterministic
CSV files with PNG companions; a single solve prints its result as a CSV
row on standard output. Solver failures are data: they are reported in the
status field with exit code 0, while configuration errors exit nonzero.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, default_config, load_config
from .errors import ConfigError, TrilocError
from .report import fmt, meta_line, render_bounds_figure, write_bounds_csv, write_sweep_outputs
from .sim import SOLVER_IDS, bound_curves, run_sweep, solve_instance, trial_rng
from .validate import render_table, run_checks

_SOLVE_HEADER = [
    "snr_db",
    "solver",
    "init",
    "status",
    "iterations",
    "grad_norm",
    "error_x1_m",
    "error_x2_m",
    "error_x3_m",
    "g1_residual",
    "g2_residual",
]


def _load(args, extra_overrides: dict | None = None) -> ExperimentConfig:
    overrides = dict(extra_overrides or {})
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "trials", None) is not None:
        overrides["trials"] = args.trials
    if getattr(args, "config", None):
        return load_config(args.config, overrides=overrides)
    return default_config(overrides)


def _pick_solver(args, cfg: ExperimentConfig) -> str:
    solver = args.solver or cfg.solvers[0]
    if solver not in SOLVER_IDS:
        raise ConfigError(
            f"unknown solver {solver!r}; expected one of {list(SOLVER_IDS)}"
        )
    return solver


def cmd_validate(args) -> int:
    results = run_checks() if args.seed is None else run_checks(seed=args.seed)
    print(render_table(results))
    return 0 if all(r.passed for r in results) else 1


def cmd_solve(args) -> int:
    cfg = _load(args)
    sc = cfg.scenario
    solver = _pick_solver(args, cfg)
    init = args.init or cfg.init
    snr = float(args.snr) if args.snr is not None else sc.snr_grid_db[0]
    snr_idx = sc.snr_grid_db.index(snr) if snr in sc.snr_grid_db else 0
    rng = trial_rng(sc, snr_idx, 0)

    try:
        record, report = solve_instance(sc, snr, solver, rng, init=init)
    except TrilocError as exc:
        # Failure is data: report it in the status column and exit cleanly.
        row = [fmt(snr), solver, init, f"error:{type(exc).__name__}"]
        row += ["0", "nan", "nan", "nan", "nan", "nan", "nan"]
        print(meta_line(cfg.sha256, sc.seed))
        print(",".join(_SOLVE_HEADER))
        print(",".join(row))
        return 0

    if report is not None:
        status = report.status.value
        iterations = str(report.iterations)
        grad_norm = fmt(report.final_grad_norm)
    else:
        status = "converged"
        iterations = "0"
        grad_norm = "nan"
    row = [fmt(snr), solver, init, status, iterations, grad_norm]
    row += [fmt(e) for e in record.position_errors]
    row += [fmt(g) for g in record.constraint_residual]
    print(meta_line(cfg.sha256, sc.seed))
    print(",".join(_SOLVE_HEADER))
    print(",".join(row))
    return 0


def cmd_sweep(args) -> int:
    extra = {}
    if args.snr is not None:
        extra["snr_grid_db"] = [float(args.snr)]
    if args.solver is not None:
        extra["solvers"] = [args.solver]
    if args.init is not None:
        extra["init"] = args.init
    cfg = _load(args, extra)
    sc = cfg.scenario
    summaries = run_sweep(sc, solvers=cfg.solvers, init=cfg.init)
    curve = bound_curves(sc)
    out_dir = args.out_dir or cfg.out_dir
    paths = write_sweep_outputs(
        out_dir, summaries, curve, cfg.sha256, sc.seed, figures=not args.no_figures
    )
    for path in paths:
        print(path)
    return 0


def cmd_bounds(args) -> int:
    extra = {}
    if args.snr is not None:
        extra["snr_grid_db"] = [float(args.snr)]
    cfg = _load(args, extra)
    sc = cfg.scenario
    curve = bound_curves(sc)
    out = Path(args.out_dir or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [write_bounds_csv(out, curve, meta_line(cfg.sha256, sc.seed))]
    if not args.no_figures:
        paths.append(render_bounds_figure(out, curve))
    for path in paths:
        print(path)
    return 0


def _add_common(sub, config=True, out_dir=False, trials=False):
    sub.add_argument("--seed", type=int, default=None, help="override the config seed")
    if config:
        sub.add_argument("--config", default=None, help="YAML experiment config path")
    if out_dir:
        sub.add_argument("--out-dir", default=None, help="output directory for artifacts")
        sub.add_argument(
            "--no-figures", action="store_true", help="write CSVs only, skip PNGs"
        )
    if trials:
        sub.add_argument("--trials", type=int, default=None, help="override trial count")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="triloc",
        description="Riemannian 3D localization of a rigid transmitter triangle.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("validate", help="run the geometry self-check suite")
    _add_common(p, config=False)
    p.set_defaults(func=cmd_validate)

    p = subs.add_parser("solve", help="solve one instance and print a CSV row")
    _add_common(p)
    p.add_argument("--snr", type=float, default=None, help="SNR in dB (default: first grid entry)")
    p.add_argument("--solver", default=None, help=f"one of {', '.join(SOLVER_IDS)}")
    p.add_argument("--init", default=None, choices=["random", "improved"], help="initialization mode")
    p.set_defaults(func=cmd_solve)

    p = subs.add_parser("sweep", help="run the Monte-Carlo sweep and write CSV/PNG artifacts")
    _add_common(p, out_dir=True, trials=True)
    p.add_argument("--snr", type=float, default=None, help="restrict the sweep to one SNR")
    p.add_argument("--solver", default=None, help="restrict the sweep to one solver")
    p.add_argument("--init", default=None, choices=["random", "improved"], help="initialization mode")
    p.set_defaults(func=cmd_sweep)

    p = subs.add_parser("bounds", help="evaluate CRB/CCRB curves and write bounds.csv")
    _add_common(p, out_dir=True)
    p.add_argument("--snr", type=float, default=None, help="restrict to one SNR")
    p.set_defaults(func=cmd_bounds)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except TrilocError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
