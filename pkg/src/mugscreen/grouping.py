"""Random and adaptive constructions of the variable groupings."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from mugscreen.core import Grouping, SupportSet

KINDS = ("random", "adaptive")


@dataclass(frozen=True)
class GroupingStrategy:
    kind: str = "adaptive"
    m_max: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.m_max < 1:
            raise ValueError("m_max must be >= 1")


def derive_trial_rng(master_seed: int, trial: int, iteration: int, stream: str = "") -> np.random.Generator:
    """Independent generator for one ``(seed, trial, iteration)`` triple.

    The triple (plus an optional stream label) is hashed with SHA-256 into
    the 128-bit key of a Philox counter-based generator, so the stream does
    not depend on platform or on the order in which trials execute.
    """
    tag = f"{int(master_seed)}:{int(trial)}:{int(iteration)}:{stream}".encode()
    key = int.from_bytes(hashlib.sha256(tag).digest()[:16], "little")
    return np.random.Generator(np.random.Philox(key=key))


def _blocks(items, m_max):
    return [tuple(int(v) for v in items[i:i + m_max]) for i in range(0, len(items), m_max)]


def random_grouping(p: int, m_max: int, rng: np.random.Generator) -> Grouping:
    """Shuffle ``range(p)`` and cut it into consecutive blocks of ``m_max``."""
    if p < 1 or m_max < 1:
        raise ValueError("p and m_max must be >= 1")
    perm = rng.permutation(p)
    return Grouping(tuple(_blocks(perm, m_max)), m_max=m_max)


def adaptive_grouping(p: int, m_max: int, current_estimate: SupportSet, rng: np.random.Generator) -> Grouping:
    """Pair each retained variable with up to ``m_max - 1`` discarded ones.

    Retained variables (``current_estimate``) are never grouped together.
    Once they are all placed, the leftover discarded variables are grouped
    among themselves in blocks of ``m_max``. If the discarded pool runs
    out, the remaining retained variables become singletons.
    """
    if p < 1 or m_max < 1:
        raise ValueError("p and m_max must be >= 1")
    keep = np.array(current_estimate.indices, dtype=np.int64)
    if keep.size and keep[-1] >= p:
        raise ValueError("current estimate has indices outside range(p)")
    mask = np.ones(p, dtype=bool)
    mask[keep] = False
    rest = rng.permutation(np.flatnonzero(mask))
    keep = rng.permutation(keep)
    groups = []
    pos = 0
    for v in keep:
        take = rest[pos:pos + m_max - 1]
        pos += take.size
        groups.append((int(v), *(int(u) for u in take)))
    groups.extend(_blocks(rest[pos:], m_max))
    return Grouping(tuple(groups), m_max=m_max)


def make_grouping(kind: str, p: int, m_max: int, current_estimate: SupportSet, rng) -> Grouping:
    if kind == "random":
        return random_grouping(p, m_max, rng)
    if kind == "adaptive":
        return adaptive_grouping(p, m_max, current_estimate, rng)
    raise ValueError(f"unknown grouping kind {kind!r}")
