"""Shared domain types, column normalization and support-set algebra.

Variable indices are 0-based everywhere inside the library. The CLI and
CSV writers convert to 1-based indices at the boundary.
"""
from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from mugscreen.errors import (
    BadGroupIndexError,
    DimensionMismatchError,
    EmptyListError,
    ZeroColumnError,
)

A1_TOL = 1e-10


def _frozen(a):
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SupportSet:
    """Sorted, duplicate-free set of variable indices."""

    indices: tuple = ()
    p: int | None = field(default=None, compare=False)

    def __post_init__(self):
        idx = tuple(sorted({int(i) for i in self.indices}))
        if idx and idx[0] < 0:
            raise BadGroupIndexError(f"negative variable index {idx[0]}")
        if self.p is not None and idx and idx[-1] >= self.p:
            raise BadGroupIndexError(f"variable index {idx[-1]} out of range for p={self.p}")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def from_mask(cls, mask) -> "SupportSet":
        mask = np.asarray(mask, dtype=bool)
        return cls(tuple(np.flatnonzero(mask).tolist()), p=mask.size)

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, item):
        i = bisect.bisect_left(self.indices, int(item))
        return i < len(self.indices) and self.indices[i] == int(item)

    def as_set(self) -> frozenset:
        return frozenset(self.indices)

    def to_mask(self, p: int) -> np.ndarray:
        mask = np.zeros(p, dtype=bool)
        mask[list(self.indices)] = True
        return mask

    def issubset(self, other: "SupportSet") -> bool:
        return self.as_set() <= other.as_set()

    def one_based(self) -> list[int]:
        return [i + 1 for i in self.indices]


@dataclass(frozen=True, eq=False)
class DesignProblem:
    """Observed pair ``(X, y)`` of the linear model ``y = X beta + w``."""

    x_matrix: np.ndarray
    y_vector: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        x = _frozen(self.x_matrix)
        y = _frozen(self.y_vector).ravel()
        if x.ndim != 2:
            raise DimensionMismatchError(f"X must be 2-dimensional, got shape {x.shape}")
        n, p = x.shape
        if n < 1 or p < 1:
            raise DimensionMismatchError(f"X must be non-empty, got shape {x.shape}")
        if y.shape[0] != n:
            raise DimensionMismatchError(f"y has length {y.shape[0]} but X has {n} rows")
        if self.normalized:
            sq = np.sum(x * x, axis=0) / n
            zero = np.flatnonzero(sq == 0)
            if zero.size:
                raise ZeroColumnError(int(zero[0]))
            bad = np.flatnonzero(np.abs(sq - 1.0) > A1_TOL)
            if bad.size:
                raise ValueError(
                    f"column {bad[0] + 1} violates ||X_j||^2/n = 1 (got {sq[bad[0]]!r})"
                )
        object.__setattr__(self, "x_matrix", x)
        object.__setattr__(self, "y_vector", y)

    @property
    def n(self) -> int:
        return self.x_matrix.shape[0]

    @property
    def p(self) -> int:
        return self.x_matrix.shape[1]

    @cached_property
    def x_fortran(self) -> np.ndarray:
        return np.asfortranarray(self.x_matrix)

    @cached_property
    def gram(self) -> np.ndarray:
        """``X^T X / n``, computed on first use."""
        return self.x_matrix.T @ self.x_matrix / self.n

    @cached_property
    def xty(self) -> np.ndarray:
        return self.x_matrix.T @ self.y_vector / self.n

    def with_y(self, y) -> "DesignProblem":
        return DesignProblem(self.x_matrix, y, normalized=self.normalized)

    def rows(self, idx) -> "DesignProblem":
        """Sub-problem on a subset of observations (no longer normalized)."""
        return DesignProblem(self.x_matrix[idx], self.y_vector[idx], normalized=False)


@dataclass(frozen=True, eq=False)
class GroundTruth:
    beta_star: np.ndarray
    sigma: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "beta_star", _frozen(self.beta_star).ravel())

    @property
    def support(self) -> SupportSet:
        return SupportSet.from_mask(self.beta_star != 0)

    @property
    def k(self) -> int:
        return int(np.count_nonzero(self.beta_star))

    @property
    def beta_min(self) -> float:
        nz = np.abs(self.beta_star[self.beta_star != 0])
        return float(nz.min()) if nz.size else 0.0


@dataclass(frozen=True)
class Grouping:
    """Partition of ``range(p)`` into disjoint groups of size at most ``m_max``."""

    groups: tuple
    m_max: int

    def __post_init__(self):
        groups = tuple(tuple(int(v) for v in g) for g in self.groups)
        object.__setattr__(self, "groups", groups)
        validate_partition(groups, self.p, self.m_max)

    @classmethod
    def singletons(cls, p: int) -> "Grouping":
        return cls(tuple((j,) for j in range(p)), m_max=1)

    @property
    def d(self) -> int:
        return len(self.groups)

    @cached_property
    def p(self) -> int:
        return sum(len(g) for g in self.groups)

    @cached_property
    def sizes(self) -> np.ndarray:
        return np.array([len(g) for g in self.groups], dtype=np.int64)

    @cached_property
    def _flat(self):
        offsets = np.zeros(self.d + 1, dtype=np.int64)
        np.cumsum(self.sizes, out=offsets[1:])
        members = np.fromiter(
            (v for g in self.groups for v in g), dtype=np.int64, count=int(offsets[-1])
        )
        offsets.setflags(write=False)
        members.setflags(write=False)
        return offsets, members

    def flat(self) -> tuple[np.ndarray, np.ndarray]:
        """CSR-style encoding ``(offsets, members)`` used by the solver kernels."""
        return self._flat

    def active(self, beta) -> np.ndarray:
        """Indices of groups holding at least one nonzero coefficient."""
        offsets, members = self._flat
        nz = (np.asarray(beta)[members] != 0).astype(np.int64)
        return np.flatnonzero(np.add.reduceat(nz, offsets[:-1]) > 0)


def validate_partition(groups: Sequence[Sequence[int]], p: int, m_max: int) -> None:
    """Raise ``ValueError`` unless ``groups`` partitions ``range(p)`` with sizes in [1, m_max]."""
    if m_max < 1:
        raise ValueError("m_max must be >= 1")
    for j, g in enumerate(groups):
        if not 1 <= len(g) <= m_max:
            raise ValueError(f"group {j} has size {len(g)}, allowed range is [1, {m_max}]")
    flat = sorted(v for g in groups for v in g)
    if flat != list(range(p)):
        raise ValueError("groups are not a partition of the variable indices")


@dataclass(frozen=True, eq=False)
class SolverSolution:
    beta_hat: np.ndarray
    lam: float
    objective: float
    kkt_residual: float
    iterations: int
    converged: bool
    objective_history: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "beta_hat", _frozen(self.beta_hat))

    def active_groups(self, grouping: Grouping) -> list[int]:
        return grouping.active(self.beta_hat).tolist()


def normalize_columns(problem: DesignProblem) -> tuple[DesignProblem, np.ndarray]:
    """Rescale every column of ``X`` so that ``||X_j||_2 / sqrt(n) = 1``.

    Returns the normalized problem and the per-column factors ``s`` such
    that ``X_normalized = X * s``. A coefficient vector ``beta`` for the
    original design maps to ``beta / s`` for the normalized one.
    """
    x = np.asarray(problem.x_matrix, dtype=float)
    n = x.shape[0]
    norms = np.sqrt(np.sum(x * x, axis=0) / n)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise ZeroColumnError(int(zero[0]))
    scale = 1.0 / norms
    # leave columns that already satisfy the constraint bit-for-bit untouched
    scale[np.abs(norms * norms - 1.0) <= 1e-15] = 1.0
    xn = x * scale
    return DesignProblem(xn, problem.y_vector, normalized=True), scale


def intersect_supports(sets: Iterable[SupportSet]) -> SupportSet:
    sets = list(sets)
    if not sets:
        raise EmptyListError("cannot intersect an empty list of supports")
    out = list(sets[0].indices)
    for s in sets[1:]:
        out = _merge_intersect(out, s.indices)
    return SupportSet(tuple(out), p=sets[0].p)


def _merge_intersect(a, b):
    i = j = 0
    out = []
    while i < len(a) and j < len(b):
        if a[i] == b[j]:
            out.append(a[i])
            i += 1
            j += 1
        elif a[i] < b[j]:
            i += 1
        else:
            j += 1
    return out


def group_support_to_variables(grouping: Grouping, selected_groups: Iterable[int]) -> SupportSet:
    members = []
    for g in selected_groups:
        if not 0 <= int(g) < grouping.d:
            raise BadGroupIndexError(f"group index {g} out of range for d={grouping.d}")
        members.extend(grouping.groups[int(g)])
    return SupportSet(tuple(members), p=grouping.p)
