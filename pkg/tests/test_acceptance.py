"""Acceptance checks, one test per criterion.

Each test appends a ``CRITERION n: PASS|FAIL ...`` line that is printed in
the terminal summary. Run directly (``python tests/test_acceptance.py``)
to print the lines without pytest; ``--fast`` skips the slow criteria.
"""
import os
import sys
import tempfile
import time
from dataclasses import replace

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from conftest import ACCEPTANCE_LINES, MUG_RUNS, orthonormal_problem, random_problem  # noqa: E402
from mugscreen import experiments as ex  # noqa: E402
from mugscreen.cli import main  # noqa: E402
from mugscreen.core import Grouping  # noqa: E402
from mugscreen.datagen import SimSpec  # noqa: E402
from mugscreen.grouping import random_grouping  # noqa: E402
from mugscreen.screening import MugConfig, mug_screen  # noqa: E402
from mugscreen.solvers import (  # noqa: E402
    SolverConfig,
    compute_lambda_max,
    kkt_check,
    solve_group_lasso,
    solve_lasso,
)
from test_solvers import block_soft_threshold_oracle, grid_search_oracle  # noqa: E402


def report(number, ok, detail):
    line = f"CRITERION {number}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def mean_by(records, method, field, K=None):
    vals = [getattr(r, field) for r in records if r.method == method and (K is None or r.K == K)]
    return float(np.mean(vals)), len(vals)


# ---------------------------------------------------------------- criterion 1

def criterion_1():
    t0 = time.perf_counter()
    cfg = ex.preset("fig3")
    records = ex.run_k_sweep(cfg, write=False)
    runs = [r for r in records if r.method in ("mug_random", "mug_adaptive")]
    contained = sum(r.contains_truth for r in runs)
    card_rand, _ = mean_by(records, "mug_random", "cardinality")
    card_adap, _ = mean_by(records, "mug_adaptive", "cardinality")
    card_lasso, _ = mean_by(records, "lasso_only", "cardinality")
    checks = {
        "containment>=398/400": contained >= 398,
        "adaptive<=random": card_adap <= card_rand,
        "adaptive mean in [10,22]": 10 <= card_adap <= 22,
    }
    failed = [k for k, v in checks.items() if not v]
    detail = (
        f"contained {contained}/{len(runs)}; mean |S| random {card_rand:.2f}, adaptive {card_adap:.2f}, "
        f"lasso-only {card_lasso:.1f}; {time.perf_counter() - t0:.0f}s"
        + (f"; failed: {', '.join(failed)}" if failed else "")
    )
    return report(1, not failed, detail)


# ---------------------------------------------------------------- criterion 2

def criterion_2():
    rng = np.random.default_rng(2024)
    violations = 0
    worst = 0.0
    for _ in range(500):
        n = int(rng.integers(10, 51))
        p = int(rng.integers(20, 201))
        m = int(rng.integers(1, 5))
        prob = random_problem(rng, n, p, k=int(rng.integers(1, 11)), sigma=float(rng.uniform(0, 1)))
        grouping = random_grouping(p, m, rng)
        lam = compute_lambda_max(prob, grouping) * 10 ** rng.uniform(-4, 0)
        sol = solve_group_lasso(prob, grouping, lam)
        size = len(sol.active_groups(grouping))
        bound = min(n, grouping.d)
        violations += size > bound
        worst = max(worst, size / bound)
    return report(2, violations == 0, f"{violations} violations in 500 triples; max |S|/min(n,d) = {worst:.2f}")


# ---------------------------------------------------------------- criterion 3

def criterion_3():
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    tight = SolverConfig(tolerance=1e-10)

    # (a) every converged solve certified by the independent KKT check
    kkt_worst, solves = 0.0, 0
    for _ in range(200):
        n, p = int(rng.integers(10, 50)), int(rng.integers(20, 150))
        prob = random_problem(rng, n, p, k=5)
        m = int(rng.integers(1, 4))
        grouping = random_grouping(p, m, rng)
        lam = compute_lambda_max(prob, grouping) * 10 ** rng.uniform(-3, 0)
        algo = ("bcd", "bcd", "fista")[solves % 3]
        cfg = SolverConfig(algorithm=algo, max_iterations=200_000)
        sol = solve_lasso(prob, lam) if m == 1 and algo == "bcd" else solve_group_lasso(prob, grouping, lam, cfg)
        if sol.converged:
            kkt_worst = max(kkt_worst, kkt_check(prob, grouping, sol))
            solves += 1
    ok_a = kkt_worst <= 1e-7

    # (b) singleton groups against the coordinate-descent Lasso
    singles = Grouping.singletons(30)
    red_worst = 0.0
    for _ in range(100):
        prob = random_problem(rng, 20, 30, k=4, sigma=0.3)
        lam = compute_lambda_max(prob) * rng.uniform(0.02, 0.9)
        a = solve_group_lasso(prob, singles, lam, tight)
        b = solve_lasso(prob, lam, tight)
        red_worst = max(red_worst, float(np.max(np.abs(a.beta_hat - b.beta_hat))))
    ok_b = red_worst <= 1e-6

    # (c) orthonormal closed form
    cf_worst = 0.0
    for m in (1, 2, 3, 4):
        for _ in range(10):
            prob = orthonormal_problem(rng, 40, 16)
            grouping = random_grouping(16, m, rng)
            lam = compute_lambda_max(prob, grouping) * rng.uniform(0.05, 1.0)
            sol = solve_group_lasso(prob, grouping, lam, tight)
            cf_worst = max(cf_worst, float(np.max(np.abs(sol.beta_hat - block_soft_threshold_oracle(prob, grouping, lam)))))
    ok_c = cf_worst <= 1e-8

    # (d) grid-search oracle, p <= 3
    gs_worst = 0.0
    for groups in (((0,),), ((0, 1),), ((0,), (1,)), ((0, 1), (2,)), ((0, 1, 2),), ((0,), (1,), (2,))):
        grouping = Grouping(groups, m_max=max(map(len, groups)))
        p = grouping.p
        for _ in range(3):
            prob = random_problem(rng, 5, p, k=p, sigma=0.3)
            lam = compute_lambda_max(prob, grouping) * rng.uniform(0.05, 0.6)
            sol = solve_group_lasso(prob, grouping, lam, tight)
            gs_worst = max(gs_worst, float(np.max(np.abs(sol.beta_hat - grid_search_oracle(prob, grouping, lam)))))
    ok_d = gs_worst <= 5e-3

    elapsed = time.perf_counter() - t0
    detail = (
        f"(a) max KKT {kkt_worst:.1e} over {solves} solves; (b) lasso reduction {red_worst:.1e}; "
        f"(c) closed form {cf_worst:.1e}; (d) grid oracle {gs_worst:.1e}; {elapsed:.0f}s"
    )
    return report(3, ok_a and ok_b and ok_c and ok_d and elapsed < 120, detail)


# ---------------------------------------------------------------- criterion 4

def criterion_4():
    before = dict(MUG_RUNS)
    bad = 0
    for trial in range(6):
        cfg = replace(ex.preset("fig3"), fixed_design=False)
        prob, _ = ex._trial_data(cfg, trial, {})
        for strategy in ("random", "adaptive"):
            for m in (2, 3):
                res = mug_screen(prob, MugConfig(big_k=15, m_max=m, strategy=strategy), trial=trial)
                sizes = res.per_iteration_sizes
                mono = all(a >= b for a, b in zip(sizes, sizes[1:]))
                bounded = sizes[0] != prob.n or sizes[-1] <= prob.n
                bad += not (mono and bounded)
    ran = MUG_RUNS["runs"] - before["runs"]
    return report(4, bad == 0, f"{bad} violations in {ran} runs here (every suite run is also checked)")


# ---------------------------------------------------------------- criterion 5

def criterion_5():
    t0 = time.perf_counter()
    cfg = ex.ExperimentConfig(
        sim=SimSpec(design="ind", p=1000, n=100, k=10, beta_min_magnitude=0.5, sigma=0.5),
        methods=["mug", "lcv", "mug_plus_lcv"],
        mug=MugConfig(m_max=2),
        k_sweep=[0, 10, 25, 50],
        trials=20,
    )
    records = ex.run_k_sweep(cfg, write=False)
    fpr = [mean_by(records, "mug", "fpr", K)[0] for K in cfg.k_sweep]
    inversions = [b - a for a, b in zip(fpr, fpr[1:]) if b > a]
    fnr50 = mean_by(records, "mug", "fnr", 50)[0]
    lcv = mean_by(records, "lcv", "fpr", 50)[0]
    both = mean_by(records, "mug_plus_lcv", "fpr", 50)[0]
    checks = {
        "FPR trend": len(inversions) == 0 or (len(inversions) == 1 and inversions[0] <= 0.02),
        "FNR<=0.1": fnr50 <= 0.1,
        "MuG+LCV<=LCV-0.1": both <= lcv - 0.1,
        "LCV level 0.8+-0.15": abs(lcv - 0.8) <= 0.15,
        "MuG+LCV level 0.2+-0.15": abs(both - 0.2) <= 0.15,
    }
    failed = [k for k, v in checks.items() if not v]
    detail = (
        "MuG FPR by K " + ", ".join(f"{k}:{v:.3f}" for k, v in zip(cfg.k_sweep, fpr))
        + f"; FNR@50 {fnr50:.3f}; FPR@50 LCV {lcv:.3f}, MuG+LCV {both:.3f}; {time.perf_counter() - t0:.0f}s"
        + (f"; failed: {', '.join(failed)}" if failed else "")
    )
    return report(5, not failed, detail)


# ---------------------------------------------------------------- criterion 6

def criterion_6(csv_path=None):
    t0 = time.perf_counter()
    if csv_path:
        sim = SimSpec(design="csv", k=10, beta_min_magnitude=0.5, sigma=0.5, csv_path=csv_path)
    else:
        sim = SimSpec(design="top", p=587, n=148, k=10, beta_min_magnitude=0.5, sigma=0.5, mu=-0.4)
    cfg = ex.ExperimentConfig(sim=sim, methods=["mug", "sis"], mug=MugConfig(m_max=2), k_sweep=[50], trials=20)
    records = ex.run_k_sweep(cfg, write=False)
    fnr_mug = mean_by(records, "mug", "fnr")[0]
    fnr_sis = mean_by(records, "sis", "fnr")[0]
    card = mean_by(records, "mug", "cardinality")[0]
    detail = (f"{sim.design} design; mean FNR MuG {fnr_mug:.3f} vs SIS {fnr_sis:.3f} "
              f"at matched mean |S| {card:.1f}; {time.perf_counter() - t0:.0f}s")
    return report(6, fnr_mug <= fnr_sis, detail)


# ---------------------------------------------------------------- criterion 7

def criterion_7():
    t0 = time.perf_counter()
    with tempfile.TemporaryDirectory() as tmp:
        cfg = os.path.join(tmp, "short.json")
        with open(cfg, "w") as fh:
            fh.write('{"k_sweep": [0, 10]}')
        outs = []
        for threads in (1, 2):
            out = os.path.join(tmp, f"t{threads}")
            code = main(["simulate", "--preset", "ind_a", "--config", cfg, "--trials", "2",
                         "--seed", "17", "--threads", str(threads), "--out", out])
            assert code == 0
            with open(os.path.join(out, "trials.csv"), "rb") as fh:
                outs.append(fh.read())
    same = outs[0] == outs[1]
    return report(7, same, f"trials.csv {'byte-identical' if same else 'differs'} for --threads 1 vs 2 "
                           f"({len(outs[0])} bytes); {time.perf_counter() - t0:.0f}s")


# ---------------------------------------------------------------- criterion 8

def criterion_8():
    # the asymptotic rate has unknown constants; its finite-sample content is
    # carried by containment (1, 5) and monotone shrinkage (4)
    status = {}
    for line in ACCEPTANCE_LINES:
        num = line.split(":")[0].split()[-1]
        status[num] = "PASS" in line.split(" - ")[0]
    wanted = ("1", "4", "5")
    missing = [c for c in wanted if c not in status]
    failed = [c for c in wanted if status.get(c) is False]
    ok = not failed and not missing
    detail = "not testable at desk scale; delegated to criteria 1, 4, 5"
    if failed:
        detail += f" (failed: {', '.join(failed)})"
    if missing:
        detail += f" (not run: {', '.join(missing)})"
    return report(8, ok, detail)


# ---------------------------------------------------------------- pytest glue

def test_criterion_1_fixed_design_replication():
    assert criterion_1()


def test_criterion_2_group_count_bound():
    assert criterion_2()


def test_criterion_3_solver_correctness():
    assert criterion_3()


def test_criterion_4_intersection_monotone():
    assert criterion_4()


@pytest.mark.slow
def test_criterion_5_independent_design_trend():
    assert criterion_5()


@pytest.mark.slow
def test_criterion_6_correlated_design():
    assert criterion_6(os.environ.get("MUGSCREEN_RL_CSV"))


def test_criterion_7_thread_determinism():
    assert criterion_7()


def test_criterion_8_asymptotic_coverage():
    assert criterion_8()


if __name__ == "__main__":
    fast = "--fast" in sys.argv
    runners = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_7, criterion_8]
    if not fast:
        runners[4:4] = [criterion_5, lambda: criterion_6(os.environ.get("MUGSCREEN_RL_CSV"))]
    results = [r() for r in runners]
    sys.exit(0 if all(results) else 1)
