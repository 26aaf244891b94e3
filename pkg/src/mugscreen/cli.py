"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 solver failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from mugscreen import experiments as ex
from mugscreen.core import DesignProblem, Grouping, normalize_columns
from mugscreen.datagen import load_design_csv, load_response_csv, read_numeric_csv
from mugscreen.errors import ConfigError, DataError, MugError, SolverFailure
from mugscreen.grouping import derive_trial_rng, random_grouping
from mugscreen.screening import MugConfig
from mugscreen.solvers import ALGORITHMS, SolverConfig, compute_lambda_max, solve_group_lasso, solve_lasso

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_SOLVER = 0, 2, 3, 4


def _experiment_parser(sub, name, help_text):
    p = sub.add_parser(name, help=help_text)
    p.add_argument("--config", help="JSON configuration file")
    p.add_argument("--preset", choices=ex.PRESETS)
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--trials", type=int)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", help="output directory")
    p.add_argument("--design-csv", help="design matrix CSV (rows are observations)")
    p.add_argument("--header", action="store_true", help="CSV files carry a header row")
    p.add_argument("--timing", action="store_true",
                   help="fill wall_time_s (makes trials.csv run-dependent)")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mugscreen", description="Tuning-free screening with multiple groupings.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    _experiment_parser(sub, "simulate", "Monte-Carlo sweep over K")
    _experiment_parser(sub, "msweep", "Monte-Carlo sweep over the group size m")
    _experiment_parser(sub, "bsweep", "Monte-Carlo sweep over the magnitude of one coefficient")

    p = sub.add_parser("screen", help="screen an observed (X, y) pair")
    p.add_argument("x_csv")
    p.add_argument("y_csv")
    p.add_argument("--methods", default="mug,sis,lcv,mug_plus_lcv",
                   help=f"comma-separated subset of {','.join(ex.SCREEN_METHODS)}")
    p.add_argument("--K", type=int, default=50, dest="big_k")
    p.add_argument("--m", type=int, default=2, dest="m_max")
    p.add_argument("--strategy", choices=("adaptive", "random"), default="adaptive")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="JSON file with a 'mug' section")
    p.add_argument("--header", action="store_true")
    p.add_argument("--out", default=".", help="directory for supports.csv")

    p = sub.add_parser("solve", help="single Lasso / group-Lasso fit with diagnostics")
    p.add_argument("x_csv")
    p.add_argument("y_csv")
    lam = p.add_mutually_exclusive_group()
    lam.add_argument("--lam", type=float, help="absolute penalty level")
    lam.add_argument("--lam-ratio", type=float, default=0.1, help="penalty as a fraction of lambda_max")
    p.add_argument("--m", type=int, default=1, dest="m_max", help="random groups of this size (1 = Lasso)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--algorithm", choices=ALGORITHMS, default="bcd")
    p.add_argument("--tol", type=float, default=1e-7)
    p.add_argument("--header", action="store_true")

    p = sub.add_parser("report", help="re-aggregate a trials.csv into summary.csv")
    p.add_argument("trials_csv")
    p.add_argument("--out", help="summary path (default: next to trials.csv)")
    return parser


def _experiment_config(args) -> ex.ExperimentConfig:
    cfg = ex.preset(args.preset, csv_path=args.design_csv) if args.preset else ex.ExperimentConfig()
    if args.config:
        cfg = ex.load_config(args.config, base=cfg)
    sim = cfg.sim
    if args.design_csv and sim.design != "csv":
        try:
            sim = replace(sim, design="csv", csv_path=args.design_csv)
        except ValueError as exc:
            raise ConfigError("sim", str(exc)) from None
    if args.header:
        sim = replace(sim, header=True)
    overrides = {"sim": sim}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.out is not None:
        overrides["output_dir"] = args.out
    if args.timing:
        overrides["record_times"] = True
    if args.threads < 1:
        raise ConfigError("threads", "must be >= 1")
    return replace(cfg, **overrides)


def _cmd_sweep(args, runner) -> int:
    cfg = _experiment_config(args)
    records = runner(cfg, threads=args.threads)
    out = Path(cfg.output_dir)
    with open(out / "config.json", "w") as fh:
        json.dump(ex.config_to_dict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {len(records)} rows to {out / 'trials.csv'} and {out / 'summary.csv'}")
    return EXIT_OK


def _load_pair(x_path, y_path, header):
    x = read_numeric_csv(x_path, header=header)
    y = load_response_csv(y_path, header=header)
    if x.shape[0] != y.shape[0]:
        raise DataError(f"{x_path} has {x.shape[0]} rows but {y_path} has {y.shape[0]}")
    problem, _ = normalize_columns(DesignProblem(x, y))
    return DesignProblem(problem.x_matrix, problem.y_vector, normalized=True)


def _cmd_screen(args) -> int:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    if not methods:
        raise ConfigError("methods", "no method given")
    mug = MugConfig(big_k=args.big_k, m_max=args.m_max, strategy=args.strategy)
    if args.config:
        with open(args.config) as fh:
            data = json.load(fh)
        mug = ex.config_from_dict({"mug": data.get("mug", {})}, ex.ExperimentConfig(mug=mug)).mug
    problem = _load_pair(args.x_csv, args.y_csv, args.header)
    supports = ex.screen_file(problem, methods, mug, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ex.write_supports(supports, out / "supports.csv")
    print(f"n={problem.n} p={problem.p}")
    for method, est in supports.items():
        print(f"{method}: {len(est)} variables")
    return EXIT_OK


def _cmd_solve(args) -> int:
    if args.m_max < 1:
        raise ConfigError("m", "must be >= 1")
    try:
        config = SolverConfig(tolerance=args.tol, algorithm=args.algorithm)
    except ValueError as exc:
        raise ConfigError("solver", str(exc)) from None
    problem = _load_pair(args.x_csv, args.y_csv, args.header)
    if args.m_max == 1:
        grouping = Grouping.singletons(problem.p)
    else:
        grouping = random_grouping(problem.p, args.m_max, derive_trial_rng(args.seed, 0, 1, "grouping"))
    lam_max = compute_lambda_max(problem, grouping)
    lam = args.lam if args.lam is not None else args.lam_ratio * lam_max
    if args.m_max == 1 and args.algorithm == "bcd":
        sol = solve_lasso(problem, lam, config)
    else:
        sol = solve_group_lasso(problem, grouping, lam, config)
    support = np.flatnonzero(sol.beta_hat) + 1
    print(f"n={problem.n} p={problem.p} groups={grouping.d}")
    print(f"lambda_max={lam_max:.6g} lambda={lam:.6g}")
    print(f"objective={sol.objective:.10g} kkt_residual={sol.kkt_residual:.3e}")
    print(f"iterations={sol.iterations} converged={sol.converged}")
    print(f"active_groups={len(sol.active_groups(grouping))} active_variables={support.size}")
    print("support=" + " ".join(map(str, support)))
    if not sol.converged:
        raise SolverFailure(f"no convergence after {sol.iterations} iterations")
    return EXIT_OK


def _cmd_report(args) -> int:
    path = Path(args.trials_csv)
    try:
        records = ex.read_trials(path)
    except (KeyError, ValueError) as exc:
        raise DataError(f"{path}: malformed trials file ({exc})") from None
    out = Path(args.out) if args.out else path.with_name("summary.csv")
    ex.write_summary(records, out)
    print(f"wrote {out}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    handlers = {
        "simulate": lambda a: _cmd_sweep(a, ex.run_k_sweep),
        "msweep": lambda a: _cmd_sweep(a, ex.run_m_sweep),
        "bsweep": lambda a: _cmd_sweep(a, ex.run_beta_min_sweep),
        "screen": _cmd_screen,
        "solve": _cmd_solve,
        "report": _cmd_report,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except json.JSONDecodeError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MugError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
