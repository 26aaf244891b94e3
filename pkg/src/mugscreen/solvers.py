"""Lasso and weighted group-Lasso solvers, regularization paths and KKT checks.

The objective for a grouping with group sizes ``m_j`` is::

    (1 / 2n) ||y - X beta||_2^2 + lam * sum_j sqrt(m_j) ||beta_{G_j}||_2

With singleton groups this is the ordinary Lasso.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from mugscreen import _kernels
from mugscreen.core import (
    DesignProblem,
    Grouping,
    SolverSolution,
    SupportSet,
    group_support_to_variables,
)
from mugscreen.errors import DimensionMismatchError, SolverFailure

log = logging.getLogger(__name__)

ALGORITHMS = ("bcd", "ista", "fista")


@dataclass(frozen=True)
class SolverConfig:
    """Solver and path settings.

    ``tolerance`` is the KKT residual at which a solve counts as converged;
    ``max_iterations`` bounds sweeps (coordinate methods) or gradient steps
    (ISTA/FISTA). ``grid_size`` and ``lambda_min_ratio`` define the
    geometric lambda grid of :func:`solve_path`.
    """

    tolerance: float = 1e-7
    max_iterations: int = 50_000
    grid_size: int = 100
    lambda_min_ratio: float = 1e-3
    algorithm: str = "bcd"
    power_iterations: int = 200
    newton: bool = True

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.grid_size < 2:
            raise ValueError("grid_size must be >= 2")
        if not 0 < self.lambda_min_ratio < 1:
            raise ValueError("lambda_min_ratio must lie in (0, 1)")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}")


@dataclass
class PathResult:
    lambdas: np.ndarray
    solutions: list
    group_support_sizes: list
    grouping: Grouping
    a4_violations: list = field(default_factory=list)

    def __len__(self):
        return len(self.solutions)


def group_penalty(beta, grouping: Grouping) -> float:
    """Weighted sum of group norms, ``sum_j sqrt(m_j) ||beta_{G_j}||_2``."""
    beta = np.asarray(beta, dtype=float)
    offsets, members = grouping.flat()
    sq = np.add.reduceat(beta[members] ** 2, offsets[:-1])
    return float(np.sqrt(grouping.sizes) @ np.sqrt(sq))


def objective(problem: DesignProblem, grouping: Grouping, beta, lam: float) -> float:
    r = problem.y_vector - problem.x_matrix @ np.asarray(beta, dtype=float)
    return float(r @ r / (2 * problem.n) + lam * group_penalty(beta, grouping))


def compute_lambda_max(problem: DesignProblem, grouping: Grouping | None = None) -> float:
    """Smallest lambda at which the zero vector is optimal."""
    z = problem.x_matrix.T @ problem.y_vector / problem.n
    if grouping is None:
        return float(np.max(np.abs(z)))
    return float(max(np.linalg.norm(z[list(g)]) / np.sqrt(len(g)) for g in grouping.groups))


def kkt_check(problem: DesignProblem, grouping: Grouping, solution: SolverSolution) -> float:
    """Optimality residual of ``solution``; zero iff it minimizes the objective."""
    beta = np.asarray(solution.beta_hat, dtype=float)
    grad = problem.x_matrix.T @ (problem.y_vector - problem.x_matrix @ beta) / problem.n
    lam = solution.lam
    worst = 0.0
    for g in grouping.groups:
        g = list(g)
        t = lam * np.sqrt(len(g))
        bn = np.linalg.norm(beta[g])
        if bn == 0:
            v = max(0.0, np.linalg.norm(grad[g]) - t)
        else:
            v = np.linalg.norm(grad[g] - t * beta[g] / bn)
        worst = max(worst, float(v))
    return worst


class _GroupData:
    """Per-(problem, grouping) quantities reused across a path."""

    def __init__(self, problem: DesignProblem, grouping: Grouping):
        if grouping.p != problem.p:
            raise DimensionMismatchError(
                f"grouping covers {grouping.p} variables but X has {problem.p} columns"
            )
        self.x = problem.x_fortran
        self.y = problem.y_vector
        self.n = problem.n
        self.offsets, self.members = grouping.flat()
        sizes = grouping.sizes
        self.weights = np.sqrt(sizes.astype(float))
        self.lips = _group_lipschitz(problem.x_matrix, grouping)


def _group_lipschitz(x, grouping: Grouping) -> np.ndarray:
    """Largest eigenvalue of ``X_G^T X_G / n`` for every group."""
    n = x.shape[0]
    sizes = grouping.sizes
    lips = np.empty(grouping.d)
    for s in np.unique(sizes):
        which = np.flatnonzero(sizes == s)
        cols = np.array([grouping.groups[j] for j in which], dtype=np.int64)
        xb = x[:, cols]  # n x d_s x s
        if s == 1:
            lips[which] = np.einsum("nd,nd->d", xb[:, :, 0], xb[:, :, 0]) / n
        else:
            gram = np.einsum("nda,ndb->dab", xb, xb) / n
            lips[which] = np.linalg.eigvalsh(gram)[:, -1]
    # all-zero groups never move; any positive curvature keeps the update finite
    lips[lips <= 0] = 1.0
    return lips


def _check_warm(warm_start, p):
    if warm_start is None:
        return np.zeros(p)
    beta = np.array(warm_start, dtype=float).ravel()
    if beta.shape[0] != p:
        raise DimensionMismatchError(f"warm start has length {beta.shape[0]}, expected {p}")
    return beta


def _finish(problem, grouping, beta, lam, kkt, iters, config, history):
    return SolverSolution(
        beta_hat=beta,
        lam=float(lam),
        objective=objective(problem, grouping, beta, lam),
        kkt_residual=float(kkt),
        iterations=int(iters),
        converged=bool(kkt <= config.tolerance),
        objective_history=history,
    )


_NO_GRAM = (np.zeros((1, 1)), np.zeros(1), 0.0)


def _newton_args(problem: DesignProblem, config: SolverConfig):
    if not config.newton:
        return _NO_GRAM
    y = problem.y_vector
    return problem.gram, problem.xty, float(y @ y / problem.n)


def _solve_bcd(data: _GroupData, problem, grouping, lam, config, beta):
    r = data.y - data.x @ beta
    history = np.empty(min(config.max_iterations, 5000) + 2)
    it, kkt, nh = _kernels.group_bcd(
        data.x, data.y, r, beta, data.offsets, data.members, data.weights, data.lips,
        float(lam), config.tolerance, config.max_iterations, history, config.newton,
        *_newton_args(problem, config),
    )
    return _finish(problem, grouping, beta, lam, kkt, it, config, history[:nh].copy())


def _power_lipschitz(x, iterations, seed=0):
    """Largest eigenvalue of ``X^T X / n`` by power iteration."""
    n, p = x.shape
    v = np.random.default_rng(seed).standard_normal(p)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iterations):
        w = x.T @ (x @ v) / n
        est = float(np.linalg.norm(w))
        if est == 0:
            return 0.0
        v = w / est
    return est


def _block_soft_threshold(u, group_of, thresholds):
    norms = np.sqrt(np.bincount(group_of, weights=u * u, minlength=len(thresholds)))
    scale = np.where(norms > thresholds, 1 - thresholds / np.where(norms > 0, norms, 1.0), 0.0)
    return scale[group_of] * u


def _solve_proximal(problem, grouping, lam, config, beta, accelerated, lip):
    """ISTA / FISTA with block soft-thresholding and step ``1/L``."""
    x, y, n = problem.x_matrix, problem.y_vector, problem.n
    group_of = np.empty(problem.p, dtype=np.intp)
    for j, g in enumerate(grouping.groups):
        group_of[list(g)] = j
    thresholds = lam * np.sqrt(grouping.sizes) / lip
    z = beta.copy()
    t = 1.0
    history = [objective(problem, grouping, beta, lam)]
    sol = None
    for it in range(1, config.max_iterations + 1):
        grad = x.T @ (y - x @ z) / n
        new = _block_soft_threshold(z + grad / lip, group_of, thresholds)
        if accelerated:
            t_next = (1 + np.sqrt(1 + 4 * t * t)) / 2
            z = new + ((t - 1) / t_next) * (new - beta)
            t = t_next
        else:
            z = new
        beta = new
        history.append(objective(problem, grouping, beta, lam))
        if it % 10 == 0 or it == config.max_iterations:
            sol = _finish(problem, grouping, beta, lam, 0.0, it, config, None)
            kkt = kkt_check(problem, grouping, sol)
            if kkt <= config.tolerance or it == config.max_iterations:
                return _finish(problem, grouping, beta, lam, kkt, it, config, np.array(history))
    raise AssertionError("unreachable")


# cold block-coordinate starts below lambda_max / CONTINUATION_START walk a geometric
# sequence with this many points per decade, warm-starting each solve
CONTINUATION_START = 10.0
CONTINUATION_PER_DECADE = 10


def _with_continuation(run, beta, lam, cold, lam_max):
    """Call ``run(lam, beta)``, first walking down from ``lam_max`` when cold.

    A cold start far below ``lambda_max`` with more columns than rows can
    leave the active set much larger than the solution's support, where
    coordinate and Newton steps both crawl. The reported iteration count
    covers the whole walk.
    """
    if not (cold and lam > 0 and lam * CONTINUATION_START < lam_max):
        return run(lam, beta)
    steps = int(np.ceil(CONTINUATION_PER_DECADE * np.log10(lam_max / lam)))
    total = 0
    for level in np.geomspace(lam_max, lam, steps + 1)[1:-1]:
        sol = run(float(level), beta)
        beta = np.array(sol.beta_hat)
        total += sol.iterations
    sol = run(lam, beta)
    return replace(sol, iterations=sol.iterations + total)


def solve_group_lasso(
    problem: DesignProblem,
    grouping: Grouping,
    lam: float,
    config: SolverConfig | None = None,
    warm_start=None,
    _data: _GroupData | None = None,
) -> SolverSolution:
    """Minimize the weighted group-Lasso objective at a single ``lam``.

    Non-convergence is not an error: the last iterate is returned with
    ``converged=False``.
    """
    config = config or SolverConfig()
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if grouping.p != problem.p:
        raise DimensionMismatchError(
            f"grouping covers {grouping.p} variables but X has {problem.p} columns"
        )
    beta = _check_warm(warm_start, problem.p)
    data = lip = None
    if config.algorithm == "bcd":
        data = _data or _GroupData(problem, grouping)
    else:
        # small safety margin: power iteration underestimates L from below
        lip = _power_lipschitz(problem.x_matrix, config.power_iterations) * 1.0001 or 1.0

    def run(level, start):
        if data is not None:
            return _solve_bcd(data, problem, grouping, level, config, start)
        return _solve_proximal(problem, grouping, level, config, start, config.algorithm == "fista", lip)

    sol = _with_continuation(run, beta, lam, warm_start is None and data is not None, compute_lambda_max(problem, grouping))
    if not sol.converged:
        log.debug("group lasso did not converge at lambda=%g (kkt=%g)", lam, sol.kkt_residual)
    return sol


def solve_lasso(
    problem: DesignProblem,
    lam: float,
    config: SolverConfig | None = None,
    warm_start=None,
) -> SolverSolution:
    """Lasso by cyclic coordinate descent with exact coordinate updates."""
    config = config or SolverConfig()
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    beta = _check_warm(warm_start, problem.p)
    x = problem.x_fortran
    colsq = np.einsum("ij,ij->j", x, x) / problem.n
    gram_args = _newton_args(problem, config)

    def run(level, start):
        start = start.copy()
        r = problem.y_vector - x @ start
        history = np.empty(min(config.max_iterations, 5000) + 2)
        it, kkt, nh = _kernels.lasso_cd(
            x, problem.y_vector, r, start, colsq, float(level), config.tolerance,
            config.max_iterations, history, config.newton, *gram_args,
        )
        return SolverSolution(
            beta_hat=start,
            lam=float(level),
            objective=float(_lasso_objective(problem, start, level)),
            kkt_residual=float(kkt),
            iterations=int(it),
            converged=bool(kkt <= config.tolerance),
            objective_history=history[:nh].copy(),
        )

    sol = _with_continuation(run, beta, lam, warm_start is None, compute_lambda_max(problem))
    if not sol.converged:
        log.debug("lasso did not converge at lambda=%g (kkt=%g)", lam, sol.kkt_residual)
    return sol


def _lasso_objective(problem, beta, lam):
    r = problem.y_vector - problem.x_matrix @ beta
    return r @ r / (2 * problem.n) + lam * np.abs(beta).sum()


def lambda_grid(lam_max: float, config: SolverConfig) -> np.ndarray:
    if lam_max <= 0:
        # y orthogonal to every column: a single meaningful point, padded geometrically
        lam_max = np.finfo(float).tiny
    return lam_max * np.geomspace(1.0, config.lambda_min_ratio, config.grid_size)


def solve_path(
    problem: DesignProblem,
    grouping: Grouping | None = None,
    config: SolverConfig | None = None,
    stop_at_size: int | None = None,
    lambdas=None,
) -> PathResult:
    """Warm-started solutions on a decreasing geometric lambda grid.

    ``grouping=None`` (or all singletons) uses the coordinate-descent Lasso.
    With ``stop_at_size`` the path is cut at the first grid point whose
    group-support size equals that value; :func:`select_support_of_size`
    would pick exactly that point from the full path.
    """
    config = config or SolverConfig()
    if grouping is None:
        grouping = Grouping.singletons(problem.p)
    lasso = grouping.m_max == 1 or grouping.d == grouping.p
    if lambdas is None:
        lambdas = lambda_grid(compute_lambda_max(problem, grouping), config)
    lambdas = np.asarray(lambdas, dtype=float)
    if np.any(np.diff(lambdas) >= 0):
        raise ValueError("lambda grid must be strictly decreasing")

    if lasso:
        members = np.array([g[0] for g in grouping.groups])
    else:
        data = _GroupData(problem, grouping) if config.algorithm == "bcd" else None

    beta = np.zeros(problem.p)
    solutions, sizes = [], []
    for lam in lambdas:
        if lasso:
            sol = solve_lasso(problem, lam, config, warm_start=beta)
            size = int(np.count_nonzero(sol.beta_hat[members]))
        else:
            sol = solve_group_lasso(problem, grouping, lam, config, warm_start=beta, _data=data)
            size = len(sol.active_groups(grouping))
        beta = np.array(sol.beta_hat)
        solutions.append(sol)
        sizes.append(size)
        if stop_at_size is not None and size == stop_at_size:
            break
    result = PathResult(
        lambdas=lambdas[: len(solutions)],
        solutions=solutions,
        group_support_sizes=sizes,
        grouping=grouping,
    )
    result.a4_violations = a4_violations(result)
    if result.a4_violations:
        log.info("path support not nested at %d grid pairs", len(result.a4_violations))
    return result


def a4_violations(path: PathResult) -> list[tuple[int, int]]:
    """Adjacent grid pairs ``(i, i+1)`` where the support at the larger lambda
    is not contained in the support at the smaller one.

    Checking consecutive pairs suffices to flag a non-nested path.
    """
    out = []
    prev = None
    for i, sol in enumerate(path.solutions):
        cur = set(sol.active_groups(path.grouping))
        if prev is not None and not prev <= cur:
            out.append((i - 1, i))
        prev = cur
    return out


def select_support_of_size(
    path: PathResult, grouping: Grouping | None = None, target: int = 1
) -> tuple[float, SupportSet]:
    """Pick the grid point whose group support best matches ``target``.

    Among points with at least ``target`` groups the smallest size wins;
    if none reaches ``target`` the largest size wins. Ties go to the
    larger lambda. Returns the lambda and the variable-level support.
    """
    if not path.solutions:
        raise ValueError("empty path")
    grouping = grouping or path.grouping
    sizes = list(path.group_support_sizes)
    reach = [i for i, s in enumerate(sizes) if s >= target]
    if reach:
        best = min(reach, key=lambda i: (sizes[i], -path.lambdas[i]))
    else:
        best = max(range(len(sizes)), key=lambda i: (sizes[i], path.lambdas[i]))
    sol = path.solutions[best]
    support = group_support_to_variables(grouping, sol.active_groups(grouping))
    return float(path.lambdas[best]), support


def check_path_converged(path: PathResult) -> None:
    if not any(s.converged for s in path.solutions):
        raise SolverFailure("no grid point converged")
