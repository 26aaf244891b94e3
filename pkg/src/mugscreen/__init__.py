"""Tuning-free variable screening by intersecting group-Lasso supports
over multiple randomized groupings of the variables."""

from mugscreen.core import (
    DesignProblem,
    GroundTruth,
    Grouping,
    SupportSet,
    SolverSolution,
    intersect_supports,
    group_support_to_variables,
    normalize_columns,
)
from mugscreen.solvers import (
    SolverConfig,
    PathResult,
    compute_lambda_max,
    group_penalty,
    kkt_check,
    select_support_of_size,
    solve_group_lasso,
    solve_lasso,
    solve_path,
)
from mugscreen.grouping import (
    GroupingStrategy,
    adaptive_grouping,
    derive_trial_rng,
    random_grouping,
)
from mugscreen.screening import (
    MugConfig,
    ScreeningResult,
    lcv_screen,
    mug_generic,
    mug_plus_lcv,
    mug_screen,
    sis_screen,
)
from mugscreen.metrics import TrialRecord, aggregate, compute_fpr_fnr

__version__ = "0.1.0"

__all__ = [
    "DesignProblem",
    "GroundTruth",
    "Grouping",
    "SupportSet",
    "SolverSolution",
    "intersect_supports",
    "group_support_to_variables",
    "normalize_columns",
    "SolverConfig",
    "PathResult",
    "compute_lambda_max",
    "group_penalty",
    "kkt_check",
    "select_support_of_size",
    "solve_group_lasso",
    "solve_lasso",
    "solve_path",
    "GroupingStrategy",
    "adaptive_grouping",
    "derive_trial_rng",
    "random_grouping",
    "MugConfig",
    "ScreeningResult",
    "lcv_screen",
    "mug_generic",
    "mug_plus_lcv",
    "mug_screen",
    "sis_screen",
    "TrialRecord",
    "aggregate",
    "compute_fpr_fnr",
]
