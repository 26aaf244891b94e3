"""Multiple-grouping screening and the SIS / cross-validated Lasso baselines."""
from __future__ import annotations

import logging
import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from mugscreen.core import DesignProblem, Grouping, SupportSet, intersect_supports
from mugscreen.errors import DegenerateSplitError
from mugscreen.grouping import derive_trial_rng, make_grouping
from mugscreen.solvers import (
    SolverConfig,
    check_path_converged,
    compute_lambda_max,
    lambda_grid,
    select_support_of_size,
    solve_path,
)

log = logging.getLogger(__name__)

METHODS = ("mug", "sis", "lcv", "mug_plus_lcv", "lasso_only")
MAX_REDRAWS = 100


@dataclass(frozen=True)
class MugConfig:
    big_k: int = 50
    m_max: int = 2
    strategy: str = "adaptive"
    solver: SolverConfig = field(default_factory=SolverConfig)
    seed: int = 0

    def __post_init__(self):
        if self.big_k < 0:
            raise ValueError("big_k must be >= 0")
        if self.m_max < 1:
            raise ValueError("m_max must be >= 1")
        if self.strategy not in ("random", "adaptive"):
            raise ValueError(f"unknown strategy {self.strategy!r}")


@dataclass
class ScreeningResult:
    method: str
    estimate: SupportSet
    per_iteration_sizes: list = field(default_factory=list)
    lambdas_used: list = field(default_factory=list)
    iterates: list = field(default_factory=list)
    flags: list = field(default_factory=list)
    m_used: int | None = None
    elapsed: list = field(default_factory=list)

    def estimate_after(self, k: int) -> SupportSet:
        """Running estimate after ``k`` grouping iterations (``k=0``: Lasso stage)."""
        return self.iterates[min(k, len(self.iterates) - 1)]


def effective_group_size(p: int, n: int, m_max: int) -> int:
    """Largest ``m <= m_max`` whose random partitions have more than ``n`` groups."""
    m = m_max
    while m > 1 and math.ceil(p / m) <= n:
        m -= 1
    if m != m_max:
        warnings.warn(
            f"group size reduced from {m_max} to {m} so that every grouping has more than n={n} groups",
            stacklevel=3,
        )
    return m


def mug_screen(problem: DesignProblem, config: MugConfig, trial: int = 0) -> ScreeningResult:
    """Tuning-free screening with the group Lasso over ``config.big_k`` groupings.

    Stage 0 selects ``n`` variables with the Lasso (or as many as the path
    reaches). Each further iteration draws a grouping with more than ``n``
    groups, selects ``n`` groups with the group Lasso and intersects the
    selected variables into the running estimate. Groupings for iteration
    ``i`` come from ``derive_trial_rng(config.seed, trial, i)``, so the run
    with ``big_k=K`` is a prefix of any run with a larger ``big_k``.
    """
    n, p = problem.n, problem.p
    start = time.perf_counter()
    flags = []
    if p <= n:
        warnings.warn(f"p={p} <= n={n}: group-Lasso iterations cannot shrink the estimate", stacklevel=2)
        flags.append("p_le_n")
    solver = config.solver

    path = solve_path(problem, None, solver, stop_at_size=n)
    check_path_converged(path)
    lam0, sbar = select_support_of_size(path, target=n)
    sizes, lams, iterates = [len(sbar)], [lam0], [sbar]
    elapsed = [time.perf_counter() - start]
    if config.big_k == 0:
        return ScreeningResult("mug", sbar, sizes, lams, iterates, flags, config.m_max, elapsed)

    m = effective_group_size(p, n, config.m_max)
    if m != config.m_max:
        flags.append(f"m_reduced_to_{m}")
    for i in range(1, config.big_k + 1):
        rng = derive_trial_rng(config.seed, trial, i, "grouping")
        for _ in range(MAX_REDRAWS):
            grouping = make_grouping(config.strategy, p, m, sbar, rng)
            if grouping.d > n:
                break
        else:
            flags.append(f"d_le_n_at_{i}")
        path = solve_path(problem, grouping, solver, stop_at_size=n)
        check_path_converged(path)
        lam_i, s_i = select_support_of_size(path, grouping, n)
        sbar = intersect_supports([sbar, s_i])
        sizes.append(len(sbar))
        lams.append(lam_i)
        iterates.append(sbar)
        elapsed.append(time.perf_counter() - start)
    return ScreeningResult("mug", sbar, sizes, lams, iterates, flags, m, elapsed)


def lasso_only_screen(problem: DesignProblem, solver: SolverConfig | None = None) -> ScreeningResult:
    res = mug_screen(problem, MugConfig(big_k=0, solver=solver or SolverConfig()))
    res.method = "lasso_only"
    return res


def mug_generic(
    problem: DesignProblem,
    selector: Callable[[DesignProblem, Grouping], SupportSet],
    groupings: Sequence[Grouping],
) -> SupportSet:
    """Intersect the supports ``selector`` picks under each grouping."""
    return intersect_supports([selector(problem, g) for g in groupings])


def sis_screen(problem: DesignProblem, target_cardinality: int) -> ScreeningResult:
    """Keep the ``target_cardinality`` variables with the largest ``|X^T y|``.

    Ties go to the lower index.
    """
    p = problem.p
    if not 0 <= target_cardinality <= p:
        raise ValueError(f"target cardinality must lie in [0, {p}]")
    omega = np.abs(problem.x_matrix.T @ problem.y_vector)
    order = np.lexsort((np.arange(p), -omega))
    est = SupportSet(tuple(order[:target_cardinality].tolist()), p=p)
    return ScreeningResult("sis", est, [len(est)])


def lcv_screen(
    problem: DesignProblem,
    folds_fraction: float = 0.7,
    repeats: int = 50,
    lambda_grid_values=None,
    rng: np.random.Generator | None = None,
    solver: SolverConfig | None = None,
) -> ScreeningResult:
    """Lasso with lambda chosen by repeated random train/test splits.

    Each repeat fits the Lasso path on a ``folds_fraction`` share of the rows
    and records the held-out mean squared error at every grid value. The
    lambda with the smallest error averaged over repeats is refit on all
    rows and its support returned.
    """
    if not 0 < folds_fraction < 1:
        raise ValueError("folds_fraction must lie in (0, 1)")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    solver = solver or SolverConfig()
    rng = rng if rng is not None else np.random.default_rng(0)
    n = problem.n
    n_train = int(round(folds_fraction * n))
    if n_train < 2 or n - n_train < 2:
        raise DegenerateSplitError(f"a {folds_fraction:.0%} split of n={n} rows leaves fewer than 2 rows on a side")
    if lambda_grid_values is None:
        grid = lambda_grid(compute_lambda_max(problem), solver)
    else:
        grid = np.asarray(lambda_grid_values, dtype=float)

    errors = np.zeros(grid.size)
    for _ in range(repeats):
        perm = rng.permutation(n)
        train, test = np.sort(perm[:n_train]), np.sort(perm[n_train:])
        path = solve_path(problem.rows(train), None, solver, lambdas=grid)
        betas = np.array([s.beta_hat for s in path.solutions])
        resid = problem.y_vector[test][None, :] - betas @ problem.x_matrix[test].T
        errors += np.mean(resid * resid, axis=1)
    errors /= repeats
    best = int(np.argmin(errors))  # first minimum = largest lambda on ties
    full = solve_path(problem, None, solver, lambdas=grid[: best + 1])
    est = SupportSet.from_mask(full.solutions[-1].beta_hat != 0)
    return ScreeningResult("lcv", est, [len(est)], [float(grid[best])])


def mug_plus_lcv(
    problem: DesignProblem,
    mug_config: MugConfig | None = None,
    *,
    mug_result: ScreeningResult | None = None,
    lcv_result: ScreeningResult | None = None,
    trial: int = 0,
    **lcv_kwargs,
) -> ScreeningResult:
    """Intersection of the MuG and cross-validated Lasso estimates.

    Precomputed results may be passed in to avoid refitting either method.
    """
    if mug_result is None:
        mug_result = mug_screen(problem, mug_config or MugConfig(), trial=trial)
    if lcv_result is None:
        lcv_result = lcv_screen(problem, **lcv_kwargs)
    est = intersect_supports([mug_result.estimate, lcv_result.estimate])
    flags = ["empty_intersection"] if not est and (mug_result.estimate or lcv_result.estimate) else []
    return ScreeningResult(
        "mug_plus_lcv", est, [len(est)],
        list(mug_result.lambdas_used) + list(lcv_result.lambdas_used), flags=flags,
    )
