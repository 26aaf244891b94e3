import numpy as np
import pytest

from mugscreen import experiments, screening
from mugscreen.core import DesignProblem, normalize_columns

# filled by test_acceptance; echoed at the end of the run
ACCEPTANCE_LINES = []

# every mug_screen call made anywhere in the suite is checked and counted
MUG_RUNS = {"runs": 0, "violations": 0}


def _checked_mug_screen(fn):
    def wrapper(problem, config, trial=0):
        res = fn(problem, config, trial=trial)
        sizes = res.per_iteration_sizes
        ok = all(a >= b for a, b in zip(sizes, sizes[1:]))
        if sizes[0] == problem.n:
            ok = ok and sizes[-1] <= problem.n
        MUG_RUNS["runs"] += 1
        MUG_RUNS["violations"] += not ok
        assert ok, f"intersection sizes not monotone or above n: {sizes}"
        return res

    return wrapper


# patched before any test module imports the name
screening.mug_screen = experiments.mug_screen = _checked_mug_screen(screening.mug_screen)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
        terminalreporter.write_line(
            f"mug_screen invariant checks across the whole run: {MUG_RUNS['runs']} runs, "
            f"{MUG_RUNS['violations']} violations"
        )


def random_problem(rng, n, p, k=3, sigma=0.1):
    """Normalized Gaussian design with a sparse signal."""
    x = rng.standard_normal((n, p))
    beta = np.zeros(p)
    beta[rng.choice(p, size=min(k, p), replace=False)] = rng.choice([-1.0, 1.0], size=min(k, p))
    y = x @ beta + sigma * rng.standard_normal(n)
    problem, _ = normalize_columns(DesignProblem(x, y))
    return problem


def orthonormal_problem(rng, n, p, y=None):
    """Design with ``X^T X / n = I`` exactly (up to rounding)."""
    q, _ = np.linalg.qr(rng.standard_normal((n, p)))
    x = np.sqrt(n) * q
    if y is None:
        y = rng.standard_normal(n)
    return DesignProblem(x, np.asarray(y, dtype=float))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
