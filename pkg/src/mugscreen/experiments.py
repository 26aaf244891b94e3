"""Monte-Carlo experiment orchestration, presets and CSV reporting."""
from __future__ import annotations

import csv
import dataclasses
import json
import logging
import os
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from mugscreen.core import DesignProblem, SupportSet, intersect_supports
from mugscreen.datagen import SimSpec, make_design, simulate_problem
from mugscreen.errors import ConfigError
from mugscreen.grouping import derive_trial_rng
from mugscreen.metrics import SUMMARY_FIELDS, TRIAL_FIELDS, TrialRecord, aggregate
from mugscreen.screening import (
    MugConfig,
    lcv_screen,
    lasso_only_screen,
    mug_screen,
    sis_screen,
)
from mugscreen.solvers import SolverConfig

log = logging.getLogger(__name__)

METHOD_NAMES = ("mug", "mug_random", "mug_adaptive", "sis", "lcv", "mug_plus_lcv", "lasso_only")


@dataclass
class ExperimentConfig:
    sim: SimSpec = field(default_factory=SimSpec)
    methods: list = field(default_factory=lambda: ["mug", "sis", "lcv", "mug_plus_lcv"])
    mug: MugConfig = field(default_factory=MugConfig)
    k_sweep: list = field(default_factory=lambda: [0, 10, 25, 50])
    m_sweep: list = field(default_factory=lambda: [2])
    beta_min_sweep: list = field(default_factory=lambda: [0.5])
    trials: int = 50
    output_dir: str = "results"
    master_seed: int = 0
    fixed_design: bool = False
    lcv_fraction: float = 0.7
    lcv_repeats: int = 50
    record_times: bool = False

    def validate(self, sweep: str = "k") -> None:
        if self.trials < 1:
            raise ConfigError("trials", "must be >= 1")
        unknown = [m for m in self.methods if m not in METHOD_NAMES]
        if unknown:
            raise ConfigError("methods", f"unknown method(s) {unknown}; choose from {METHOD_NAMES}")
        if not self.methods:
            raise ConfigError("methods", "must not be empty")
        sweeps = {"k": "k_sweep", "m": "m_sweep", "beta_min": "beta_min_sweep"}
        name = sweeps[sweep]
        values = getattr(self, name)
        if not values:
            raise ConfigError(name, "must not be empty")
        if sweep == "k" and any(int(k) < 0 for k in values):
            raise ConfigError(name, "K values must be >= 0")
        if sweep == "m" and any(int(m) < 1 for m in values):
            raise ConfigError(name, "m values must be >= 1")
        if sweep == "beta_min" and any(float(b) < 0 for b in values):
            raise ConfigError(name, "beta_min values must be >= 0")
        if not 0 < self.lcv_fraction < 1:
            raise ConfigError("lcv_fraction", "must lie in (0, 1)")
        if self.lcv_repeats < 1:
            raise ConfigError("lcv_repeats", "must be >= 1")


# --------------------------------------------------------------------------
# presets

def _ind(n, k, **kw):
    return SimSpec(design="ind", p=1000, n=n, k=k, beta_min_magnitude=0.5, sigma=0.5, **kw)


def _top(n, k, **kw):
    return SimSpec(design="top", p=1000, n=n, k=k, beta_min_magnitude=0.5, sigma=0.5, mu=-0.4, **kw)


def _rl_sim(k, csv_path=None):
    if csv_path:
        return SimSpec(design="csv", k=k, beta_min_magnitude=0.5, sigma=0.5, csv_path=csv_path)
    # no shipped gene-expression data: correlated Toeplitz stand-in of the same shape
    return SimSpec(design="top", p=587, n=148, k=k, beta_min_magnitude=0.5, sigma=0.5, mu=-0.4)


K_SWEEP = [0, 10, 25, 50, 100]


def preset(name: str, csv_path: str | None = None) -> ExperimentConfig:
    """Named experiment settings for the standard simulation studies."""
    k_presets = {
        "ind_a": _ind(100, 10), "ind_b": _ind(300, 30), "ind_c": _ind(500, 50),
        "top_d": _top(100, 10), "top_e": _top(300, 30), "top_f": _top(500, 50),
    }
    k_presets.update(top_a=k_presets["top_d"], top_b=k_presets["top_e"], top_c=k_presets["top_f"])
    if name == "fig3":
        return ExperimentConfig(
            sim=SimSpec(design="ind", p=100, n=30, k=5, beta_min_magnitude=1.0, sigma=1.0),
            methods=["mug_random", "mug_adaptive", "lasso_only"],
            mug=MugConfig(big_k=50, m_max=2),
            k_sweep=[50],
            trials=200,
            fixed_design=True,
            output_dir="results/fig3",
        )
    if name in k_presets:
        return ExperimentConfig(sim=k_presets[name], k_sweep=list(K_SWEEP), output_dir=f"results/{name}")
    if name in ("rl_a", "rl_b"):
        if not csv_path:
            warnings.warn("no design CSV given; using a Toeplitz design with p=587, n=148", stacklevel=2)
        return ExperimentConfig(
            sim=_rl_sim(10 if name == "rl_a" else 20, csv_path),
            k_sweep=list(K_SWEEP), output_dir=f"results/{name}",
        )
    if name == "m_sweep":
        return ExperimentConfig(
            sim=replace(_ind(100, 10), beta_min_magnitude=2.0),
            methods=["mug"],
            mug=MugConfig(big_k=100),
            k_sweep=[100],
            m_sweep=list(range(2, 11)),
            output_dir="results/m_sweep",
        )
    if name == "bmin_sweep":
        return ExperimentConfig(
            sim=replace(_ind(100, 10), beta_min_magnitude=2.0),
            methods=["mug"],
            mug=MugConfig(big_k=50),
            k_sweep=[50],
            beta_min_sweep=[0.1, 0.25, 0.5, 1.0, 2.0],
            output_dir="results/bmin_sweep",
        )
    raise ConfigError("preset", f"unknown preset {name!r}")


PRESETS = ("fig3", "ind_a", "ind_b", "ind_c", "top_a", "top_b", "top_c", "top_d", "top_e",
           "top_f", "rl_a", "rl_b", "m_sweep", "bmin_sweep")


# --------------------------------------------------------------------------
# config files

def config_from_dict(data: dict, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Overlay a JSON-style mapping onto ``base`` (defaults when omitted)."""
    cfg = base or ExperimentConfig()
    data = dict(data)
    try:
        sim = replace(cfg.sim, **data.pop("sim", {}))
        mug_raw = dict(data.pop("mug", {}))
        solver = replace(cfg.mug.solver, **mug_raw.pop("solver", {}))
        mug = replace(cfg.mug, solver=solver, **mug_raw)
    except TypeError as exc:
        raise ConfigError("config", str(exc)) from None
    except ValueError as exc:
        raise ConfigError("config", str(exc)) from None
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    extra = set(data) - known
    if extra:
        raise ConfigError(sorted(extra)[0], "unknown configuration key")
    return replace(cfg, sim=sim, mug=mug, **data)


def load_config(path, base: ExperimentConfig | None = None) -> ExperimentConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"{path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config", f"{path}: top level must be an object")
    return config_from_dict(data, base)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    return dataclasses.asdict(cfg)


# --------------------------------------------------------------------------
# trials

def _trial_data(cfg: ExperimentConfig, trial: int, design_cache: dict, perturbed=None):
    """Design, response and truth for one trial.

    With ``fixed_design`` every trial reuses trial 0's draw; a CSV design is
    loaded once and only ``beta*`` and the noise are redrawn.
    """
    data_trial = 0 if cfg.fixed_design else trial
    rng = derive_trial_rng(cfg.master_seed, data_trial, 0, "data")
    if cfg.sim.design == "csv":
        if "x" not in design_cache:
            design_cache["x"] = make_design(cfg.sim, rng)
        x = design_cache["x"]
    else:
        x = make_design(cfg.sim, rng)
    return simulate_problem(x, cfg.sim, rng, perturbed_magnitude=perturbed)


def _strategies(methods, default):
    out = []
    for m in methods:
        if m == "mug_random":
            out.append("random")
        elif m == "mug_adaptive":
            out.append("adaptive")
        elif m in ("mug", "sis", "mug_plus_lcv"):
            out.append(default)
    return sorted(set(out))


def _run_methods(cfg: ExperimentConfig, problem: DesignProblem, truth, trial: int,
                 mug: MugConfig, k_values, beta_min=None) -> list[TrialRecord]:
    methods = cfg.methods
    kmax = max(k_values)
    results, times = {}, {}
    for strategy in _strategies(methods, mug.strategy):
        results[strategy] = mug_screen(
            problem, replace(mug, big_k=kmax, strategy=strategy, seed=cfg.master_seed), trial=trial
        )
    lasso = None
    if "lasso_only" in methods:
        if results:
            lasso = next(iter(results.values()))
        else:
            lasso = lasso_only_screen(problem, mug.solver)
    lcv = None
    if "lcv" in methods or "mug_plus_lcv" in methods:
        t0 = time.perf_counter()
        lcv = lcv_screen(
            problem, cfg.lcv_fraction, cfg.lcv_repeats,
            rng=derive_trial_rng(cfg.master_seed, trial, 0, "lcv"), solver=mug.solver,
        )
        times["lcv"] = time.perf_counter() - t0

    timed = cfg.record_times
    records = []
    truth_set = truth.support
    for k in k_values:
        for method in methods:
            wall = None
            if method in ("mug", "mug_random", "mug_adaptive"):
                strategy = {"mug_random": "random", "mug_adaptive": "adaptive"}.get(method, mug.strategy)
                res = results[strategy]
                est = res.estimate_after(k)
                wall = res.elapsed[min(k, len(res.elapsed) - 1)]
            elif method == "lasso_only":
                est = lasso.estimate_after(0)
                wall = lasso.elapsed[0]
            elif method == "sis":
                t0 = time.perf_counter()
                target = len(results[mug.strategy].estimate_after(k))
                est = sis_screen(problem, target).estimate
                wall = time.perf_counter() - t0
            elif method == "lcv":
                est = lcv.estimate
                wall = times["lcv"]
            else:  # mug_plus_lcv
                res = results[mug.strategy]
                est = intersect_supports([res.estimate_after(k), lcv.estimate])
                wall = res.elapsed[min(k, len(res.elapsed) - 1)] + times["lcv"]
            records.append(TrialRecord.from_sets(
                method, trial, int(k), int(mug.m_max), est, truth_set,
                wall_time_s=wall if timed else None, beta_min=beta_min,
            ))
    return records


def _map_trials(fn, trials: int, threads: int):
    if threads <= 1:
        return [fn(t) for t in range(trials)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(trials)))


def _sorted(records):
    return sorted(records, key=lambda r: (r.method, r.K, r.m, r.beta_min or 0.0, r.trial))


def run_k_sweep(cfg: ExperimentConfig, threads: int = 1, write: bool = True) -> list[TrialRecord]:
    """Every configured method at every K of ``cfg.k_sweep``, per trial.

    One MuG run with the largest K serves all smaller K values: the
    grouping of iteration ``i`` depends only on ``(seed, trial, i)``, so
    shorter runs are prefixes of the longest one.
    """
    cfg.validate("k")
    cache = {}
    if cfg.sim.design == "csv":
        _trial_data(cfg, 0, cache)

    def one(trial):
        problem, truth = _trial_data(cfg, trial, cache)
        return _run_methods(cfg, problem, truth, trial, cfg.mug, [int(k) for k in cfg.k_sweep])

    records = _sorted(r for rows in _map_trials(one, cfg.trials, threads) for r in rows)
    if write:
        write_outputs(records, cfg.output_dir)
    return records


def run_m_sweep(cfg: ExperimentConfig, threads: int = 1, write: bool = True) -> list[TrialRecord]:
    cfg.validate("m")
    cache = {}
    if cfg.sim.design == "csv":
        _trial_data(cfg, 0, cache)
    n, p = _dims(cfg, cache)
    for m in cfg.m_sweep:
        if -(-p // int(m)) <= n:
            warnings.warn(f"m={m} gives at most {-(-p // int(m))} groups <= n={n}; group size will be reduced",
                          stacklevel=2)

    def one(trial):
        problem, truth = _trial_data(cfg, trial, cache)
        rows = []
        for m in cfg.m_sweep:
            mug = replace(cfg.mug, m_max=int(m))
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                rows.extend(_run_methods(cfg, problem, truth, trial, mug, [int(k) for k in cfg.k_sweep]))
        return rows

    records = _sorted(r for rows in _map_trials(one, cfg.trials, threads) for r in rows)
    if write:
        write_outputs(records, cfg.output_dir)
    return records


def run_beta_min_sweep(cfg: ExperimentConfig, threads: int = 1, write: bool = True) -> list[TrialRecord]:
    """Vary the magnitude of a single entry of ``beta*``, everything else fixed."""
    cfg.validate("beta_min")
    cache = {}
    if cfg.sim.design == "csv":
        _trial_data(cfg, 0, cache)

    def one(trial):
        rows = []
        for b in cfg.beta_min_sweep:
            # same trial seed for every value: only the perturbed entry differs
            problem, truth = _trial_data(cfg, trial, cache, perturbed=float(b))
            rows.extend(_run_methods(cfg, problem, truth, trial, cfg.mug,
                                     [int(k) for k in cfg.k_sweep], beta_min=float(b)))
        return rows

    records = _sorted(r for rows in _map_trials(one, cfg.trials, threads) for r in rows)
    if write:
        write_outputs(records, cfg.output_dir)
    return records


def _dims(cfg, cache):
    if cfg.sim.design == "csv":
        return cache["x"].shape
    return cfg.sim.n, cfg.sim.p


# --------------------------------------------------------------------------
# CSV output

def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _trial_fields(records):
    fields = list(TRIAL_FIELDS)
    if any(r.beta_min is not None for r in records):
        fields.insert(fields.index("m") + 1, "beta_min")
    return fields


def write_trials(records, path) -> None:
    records = list(records)
    fields = _trial_fields(records)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fields)
        for r in records:
            row = r.as_row()
            w.writerow([_fmt(row[f]) for f in fields])


def summarize(records) -> tuple[list[str], list[dict]]:
    records = list(records)
    keys = ("method", "K", "m")
    fields = list(SUMMARY_FIELDS)
    if any(r.beta_min is not None for r in records):
        keys = ("method", "K", "m", "beta_min")
        fields.insert(fields.index("m") + 1, "beta_min")
    return fields, aggregate(records, group_by=keys)


def write_summary(records, path) -> None:
    fields, rows = summarize(records)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fields)
        for row in rows:
            w.writerow([_fmt(row[f]) for f in fields])


def write_outputs(records, output_dir) -> tuple[Path, Path]:
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    trials, summary = out / "trials.csv", out / "summary.csv"
    write_trials(records, trials)
    write_summary(records, summary)
    return trials, summary


def read_trials(path) -> list[TrialRecord]:
    """Parse a ``trials.csv`` written by :func:`write_trials`."""
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            wall = row.get("wall_time_s") or ""
            bmin = row.get("beta_min")
            out.append(TrialRecord(
                method=row["method"], trial=int(row["trial"]), K=int(row["K"]), m=int(row["m"]),
                cardinality=int(row["cardinality"]), fpr=float(row["fpr"]), fnr=float(row["fnr"]),
                contains_truth=row["contains_truth"] in ("1", "True", "true"),
                wall_time_s=float(wall) if wall else None,
                beta_min=float(bmin) if bmin not in (None, "") else None,
            ))
    return out


# --------------------------------------------------------------------------
# screening user data

SCREEN_METHODS = ("mug", "sis", "lcv", "mug_plus_lcv", "lasso_only")


def screen_file(problem: DesignProblem, methods, mug: MugConfig, lcv_fraction=0.7, lcv_repeats=50,
                seed: int = 0) -> dict[str, SupportSet]:
    """Run the requested screeners on an observed ``(X, y)``.

    SIS is matched to the MuG cardinality (MuG is computed for that even
    when not requested).
    """
    bad = [m for m in methods if m not in SCREEN_METHODS]
    if bad:
        raise ConfigError("methods", f"unknown method(s) {bad}")
    out = {}
    mug_res = None
    if any(m in methods for m in ("mug", "sis", "mug_plus_lcv", "lasso_only")):
        mug_res = mug_screen(problem, replace(mug, seed=seed))
    lcv_res = None
    if "lcv" in methods or "mug_plus_lcv" in methods:
        lcv_res = lcv_screen(problem, lcv_fraction, lcv_repeats,
                             rng=derive_trial_rng(seed, 0, 0, "lcv"), solver=mug.solver)
    for m in methods:
        if m == "mug":
            out[m] = mug_res.estimate
        elif m == "lasso_only":
            out[m] = mug_res.estimate_after(0)
        elif m == "sis":
            out[m] = sis_screen(problem, len(mug_res.estimate)).estimate
        elif m == "lcv":
            out[m] = lcv_res.estimate
        else:
            out[m] = intersect_supports([mug_res.estimate, lcv_res.estimate])
    return out


def write_supports(supports: dict, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "cardinality", "indices"])
        for method, est in supports.items():
            w.writerow([method, len(est), " ".join(str(i) for i in est.one_based())])
