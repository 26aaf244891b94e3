"""Synthetic designs, sparse coefficient vectors and CSV design loading."""
from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from mugscreen.core import DesignProblem, GroundTruth, normalize_columns
from mugscreen.errors import DataError, NonNumericCellError, RaggedRowsError

DESIGNS = ("ind", "top", "csv")


@dataclass(frozen=True)
class SimSpec:
    design: str = "ind"
    p: int = 1000
    n: int = 100
    k: int = 10
    beta_min_magnitude: float = 0.5
    sigma: float = 0.5
    mu: float = -0.4
    seed: int = 0
    csv_path: str | None = None
    header: bool = False

    def __post_init__(self):
        if self.design not in DESIGNS:
            raise ValueError(f"design must be one of {DESIGNS}")
        if self.design != "csv" and not (self.n >= 1 and self.p >= 1):
            raise ValueError("n and p must be >= 1")
        if self.design != "csv" and not 0 <= self.k <= self.p:
            raise ValueError("k must lie in [0, p]")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if self.design == "top" and not abs(self.mu) < 1:
            raise ValueError("|mu| must be < 1 for the Toeplitz design")
        if self.design == "csv" and not self.csv_path:
            raise ValueError("csv design needs csv_path")


def _normalized(x):
    problem, _ = normalize_columns(DesignProblem(x, np.zeros(x.shape[0])))
    return np.array(problem.x_matrix)


def generate_ind_design(n: int, p: int, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. standard normal entries, columns rescaled to ``||X_j||^2 = n``."""
    return _normalized(rng.standard_normal((n, p)))


def toeplitz_covariance(p: int, mu: float) -> np.ndarray:
    idx = np.arange(p)
    return mu ** np.abs(idx[:, None] - idx[None, :])


def generate_top_design(n: int, p: int, mu: float, rng: np.random.Generator) -> np.ndarray:
    """Rows drawn from ``N(0, Sigma)`` with ``Sigma_ij = mu^|i-j|``.

    Uses the stationary AR(1) recursion along the columns, which has
    exactly this covariance.
    """
    if not abs(mu) < 1:
        raise ValueError("|mu| must be < 1")
    z = rng.standard_normal((n, p))
    x = np.empty_like(z)
    x[:, 0] = z[:, 0]
    c = np.sqrt(1.0 - mu * mu)
    for j in range(1, p):
        x[:, j] = mu * x[:, j - 1] + c * z[:, j]
    return _normalized(x)


def generate_beta(
    p: int,
    k: int,
    beta_min_magnitude: float,
    rng: np.random.Generator,
    perturbed_magnitude: float | None = None,
    sigma: float = 0.0,
) -> GroundTruth:
    """Support of size ``k`` drawn uniformly, entries ``+-beta_min_magnitude``.

    With ``perturbed_magnitude`` the first drawn support entry gets that
    magnitude instead (``0`` removes it from the support).
    """
    if not 0 <= k <= p:
        raise ValueError("k must lie in [0, p]")
    beta = np.zeros(p)
    support = rng.choice(p, size=k, replace=False)
    signs = rng.choice(np.array([-1.0, 1.0]), size=k)
    beta[support] = signs * beta_min_magnitude
    if perturbed_magnitude is not None and k > 0:
        beta[support[0]] = signs[0] * perturbed_magnitude
    return GroundTruth(beta, sigma=sigma)


def simulate_observations(x, beta_star, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """``y = X beta* + w`` with ``w ~ N(0, sigma^2 I)``."""
    x = np.asarray(x, dtype=float)
    beta_star = np.asarray(beta_star, dtype=float)
    if x.shape[1] != beta_star.shape[0]:
        raise ValueError(f"X has {x.shape[1]} columns but beta has length {beta_star.shape[0]}")
    mean = x @ beta_star
    if sigma == 0:
        return mean
    return mean + sigma * rng.standard_normal(x.shape[0])


def read_numeric_csv(path, header: bool = False) -> np.ndarray:
    """Rectangular numeric CSV as a 2-D float array (rows as observations)."""
    path = os.fspath(path)
    rows = []
    width = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for line_no, row in enumerate(reader, start=1):
            if header and line_no == 1:
                continue
            if not row or all(not cell.strip() for cell in row):
                continue
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise RaggedRowsError(path, line_no, width, len(row))
            vals = []
            for col, cell in enumerate(row, start=1):
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise NonNumericCellError(path, line_no, col, cell) from None
            rows.append(vals)
    if not rows:
        raise DataError(f"{path}: no data rows")
    return np.array(rows, dtype=float)


def load_design_csv(path, header: bool = False) -> np.ndarray:
    """Load and column-normalize a design matrix; ``x.shape`` gives ``(n, p)``."""
    return _normalized(read_numeric_csv(path, header=header))


def load_response_csv(path, header: bool = False) -> np.ndarray:
    data = read_numeric_csv(path, header=header)
    if data.shape[1] != 1 and data.shape[0] != 1:
        raise DataError(f"{path}: expected a single column, got shape {data.shape}")
    return data.ravel()


def make_design(spec: SimSpec, rng: np.random.Generator) -> np.ndarray:
    if spec.design == "ind":
        return generate_ind_design(spec.n, spec.p, rng)
    if spec.design == "top":
        return generate_top_design(spec.n, spec.p, spec.mu, rng)
    return load_design_csv(spec.csv_path, header=spec.header)


def simulate_problem(
    x: np.ndarray,
    spec: SimSpec,
    rng: np.random.Generator,
    perturbed_magnitude: float | None = None,
) -> tuple[DesignProblem, GroundTruth]:
    """Draw ``beta*`` for the (already normalized) design and simulate ``y``."""
    truth = generate_beta(
        x.shape[1], spec.k, spec.beta_min_magnitude, rng,
        perturbed_magnitude=perturbed_magnitude, sigma=spec.sigma,
    )
    y = simulate_observations(x, truth.beta_star, spec.sigma, rng)
    return DesignProblem(x, y, normalized=True), truth
