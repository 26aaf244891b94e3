"""False-positive / false-negative rates and Monte-Carlo aggregation."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from mugscreen.core import SupportSet
from mugscreen.errors import EmptyInputError

TRIAL_FIELDS = ("method", "K", "m", "trial", "cardinality", "fpr", "fnr", "contains_truth", "wall_time_s")
SUMMARY_FIELDS = (
    "method", "K", "m", "fpr_mean", "fpr_std", "fnr_mean", "fnr_std",
    "card_mean", "containment_rate", "trials",
)


def compute_fpr_fnr(estimate: SupportSet, truth: SupportSet) -> tuple[float, float]:
    """``FPR = |est - truth| / |est|`` and ``FNR = |truth - est| / |truth|``.

    An empty estimate has FPR 0 and an empty truth has FNR 0.
    """
    est, tru = estimate.as_set(), truth.as_set()
    fpr = len(est - tru) / len(est) if est else 0.0
    fnr = len(tru - est) / len(tru) if tru else 0.0
    return fpr, fnr


@dataclass(frozen=True)
class TrialRecord:
    method: str
    trial: int
    K: int
    m: int
    cardinality: int
    fpr: float
    fnr: float
    contains_truth: bool
    wall_time_s: float | None = None
    beta_min: float | None = None

    def __post_init__(self):
        if not (0.0 <= self.fpr <= 1.0 and 0.0 <= self.fnr <= 1.0):
            raise ValueError(f"rates out of [0, 1]: fpr={self.fpr}, fnr={self.fnr}")

    @classmethod
    def from_sets(cls, method, trial, K, m, estimate: SupportSet, truth: SupportSet,
                  wall_time_s=None, beta_min=None):
        fpr, fnr = compute_fpr_fnr(estimate, truth)
        return cls(
            method=method, trial=trial, K=K, m=m, cardinality=len(estimate),
            fpr=fpr, fnr=fnr, contains_truth=truth.issubset(estimate),
            wall_time_s=wall_time_s, beta_min=beta_min,
        )

    def as_row(self) -> dict:
        return asdict(self)


def _mean_std(values):
    n = len(values)
    mean = math.fsum(values) / n
    if n < 2:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var)


def aggregate(records, group_by=("method", "K", "m")) -> list[dict]:
    """Mean / sample standard deviation of the rates per key.

    Rows come back sorted by key, so the output does not depend on the
    order of ``records``.
    """
    records = list(records)
    if not records:
        raise EmptyInputError("no records to aggregate")
    buckets: dict[tuple, list] = {}
    for rec in records:
        key = tuple(getattr(rec, k) for k in group_by)
        buckets.setdefault(key, []).append(rec)
    rows = []
    for key in sorted(buckets):
        # fixed order inside the bucket keeps floating-point sums reproducible
        recs = sorted(buckets[key], key=lambda r: r.trial)
        fpr_mean, fpr_std = _mean_std([r.fpr for r in recs])
        fnr_mean, fnr_std = _mean_std([r.fnr for r in recs])
        card_mean, _ = _mean_std([float(r.cardinality) for r in recs])
        row = dict(zip(group_by, key))
        row.update(
            fpr_mean=fpr_mean, fpr_std=fpr_std, fnr_mean=fnr_mean, fnr_std=fnr_std,
            card_mean=card_mean,
            containment_rate=sum(r.contains_truth for r in recs) / len(recs),
            trials=len(recs),
        )
        rows.append(row)
    return rows
