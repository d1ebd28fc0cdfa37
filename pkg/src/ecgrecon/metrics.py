"""Reconstruction-quality indices (coefficient of determination, Pearson
correlation) and their per-lead / per-subgroup aggregation.

All sums are accumulated in float64 regardless of input precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConstantInput, ConstantReference
from .ingest import Subgroup
from .leads import TARGET_9

R2_VARIANTS = ("conventional", "literal")
AVG_ROW = "Avg"


def _check_pair(x, y):
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape[0]} vs {y.shape[0]}")
    if x.shape[0] < 2:
        raise ValueError("need at least 2 samples")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite samples")
    return x, y


def compute_r2(x, y, variant: str = "conventional") -> float:
    """Coefficient of determination between original x and reconstruction y.

    conventional: 1 - sum((x-y)^2) / sum((x-mean(x))^2). Equals 1 iff y == x;
    can be negative for poor fits.

    literal: 1 - sum((x-mean(y))^2) / sum((y-mean(y))^2), an alternative that
    normalizes by the reconstruction's variance instead (kept for auditing;
    note it yields 0, not 1, at y == x).
    """
    x, y = _check_pair(x, y)
    if variant == "conventional":
        sst = float(np.sum((x - x.mean()) ** 2))
        if sst == 0.0:
            raise ConstantReference("reference signal is constant")
        ss_res = float(np.sum((x - y) ** 2))
        return 1.0 - ss_res / sst
    if variant == "literal":
        y_mean = y.mean()
        denom = float(np.sum((y - y_mean) ** 2))
        if denom == 0.0:
            raise ConstantInput("reconstruction is constant")
        return 1.0 - float(np.sum((x - y_mean) ** 2)) / denom
    raise ValueError(f"unknown variant {variant!r}; expected one of {R2_VARIANTS}")


def compute_rx(x, y) -> float:
    """Pearson correlation coefficient; exactly 1.0 when y == x elementwise."""
    x, y = _check_pair(x, y)
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(np.sum(dx * dx))
    syy = float(np.sum(dy * dy))
    if sxx == 0.0 or syy == 0.0:
        raise ConstantInput("correlation undefined for constant input")
    # single sqrt of the product keeps rx(x, x) == 1.0 bit-exactly
    return float(np.sum(dx * dy)) / math.sqrt(sxx * syy)


@dataclass
class LeadMetrics:
    r2: float
    rx: float       # nan when the correlation is undefined (constant reconstruction)


@dataclass
class RecordMetrics:
    record_id: str
    subgroup: Subgroup
    per_lead: dict[str, LeadMetrics]


@dataclass
class CellStats:
    r2: float
    rx: float
    n_records: int


@dataclass
class MetricsReport:
    """Per-lead table (TARGET_9 rows + Avg) with optional per-subgroup tables."""

    model: str
    dataset: str
    split: str
    overall: dict[str, CellStats]
    subgroups: dict[str, dict[str, CellStats]] = field(default_factory=dict)
    dataset_hash: str = ""
    r2_variant: str = "conventional"

    def to_dict(self) -> dict:
        def cells(table):
            return {lead: {"r2": c.r2, "rx": c.rx, "n_records": c.n_records}
                    for lead, c in table.items()}
        return {
            "model": self.model,
            "dataset": self.dataset,
            "split": self.split,
            "overall": cells(self.overall),
            "subgroups": {s: cells(t) for s, t in self.subgroups.items()},
            "dataset_hash": self.dataset_hash,
            "r2_variant": self.r2_variant,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        def cells(table):
            return {lead: CellStats(r2=c["r2"], rx=c["rx"], n_records=c["n_records"])
                    for lead, c in table.items()}
        return cls(
            model=d["model"], dataset=d["dataset"], split=d["split"],
            overall=cells(d["overall"]),
            subgroups={s: cells(t) for s, t in d["subgroups"].items()},
            dataset_hash=d.get("dataset_hash", ""),
            r2_variant=d.get("r2_variant", "conventional"),
        )


def _mean(values: list[float]) -> float:
    finite = [v for v in values if not math.isnan(v)]
    if not finite:
        return math.nan
    return float(np.mean(np.asarray(finite, dtype=np.float64)))


def _table(records: list[RecordMetrics]) -> dict[str, CellStats]:
    table = {}
    for lead in TARGET_9:
        r2s = [r.per_lead[lead].r2 for r in records if lead in r.per_lead]
        rxs = [r.per_lead[lead].rx for r in records if lead in r.per_lead]
        if not r2s:
            continue    # empty cell stays absent
        table[lead] = CellStats(r2=_mean(r2s), rx=_mean(rxs), n_records=len(r2s))
    lead_cells = [table[lead] for lead in TARGET_9 if lead in table]
    if lead_cells:
        table[AVG_ROW] = CellStats(
            r2=_mean([c.r2 for c in lead_cells]),
            rx=_mean([c.rx for c in lead_cells]),
            n_records=max(c.n_records for c in lead_cells),
        )
    return table


def aggregate(records: list[RecordMetrics], model: str = "", dataset: str = "",
              split: str = "", dataset_hash: str = "",
              r2_variant: str = "conventional") -> MetricsReport:
    """Unweighted per-record means within each (lead, subgroup) cell.

    The Avg row is the mean of the 9 per-lead means, not the pooled mean.
    Subgroup tables are emitted only for labeled subgroups that are present;
    UNKNOWN records contribute to the overall table only.
    """
    report = MetricsReport(model=model, dataset=dataset, split=split,
                           overall=_table(records), dataset_hash=dataset_hash,
                           r2_variant=r2_variant)
    for subgroup in Subgroup:
        if subgroup is Subgroup.UNKNOWN:
            continue
        group = [r for r in records if r.subgroup is subgroup]
        if group:
            report.subgroups[subgroup.value] = _table(group)
    return report
