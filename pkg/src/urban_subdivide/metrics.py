"""Per-cell mobility metrics.

A metric is a ratio of group visit counts to total visits, aggregated over
a daily time window, then standardized to zero mean and unit sample
standard deviation across cells.  Cells without observations drop out and
are reported rather than imputed.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from datetime import date, datetime
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DegenerateFieldError, EmptyWindowError, InvalidSpecError
from .ingest import CellGrid, VisitRecord, elder_groups

__all__ = [
    "METRIC_IDS",
    "TimeWindow",
    "DEFAULT_WINDOW",
    "MetricField",
    "scale_merged_cells",
    "ratio",
    "standardize",
    "compute_metric",
]

METRIC_IDS = ("G", "E", "T")


@dataclass(frozen=True)
class TimeWindow:
    """Daily window [start_hour, end_hour) plus an optional date range.

    Bounds must sit on 4-hour bin edges; ``end_hour`` 24 means midnight.
    """

    start_hour: int = 8
    end_hour: int = 24
    days: tuple[date, date] | None = None

    def __post_init__(self):
        if not (0 <= self.start_hour < self.end_hour <= 24):
            raise InvalidSpecError(
                f"window must satisfy 0 <= start < end <= 24, got [{self.start_hour}, {self.end_hour})"
            )
        if self.start_hour % 4 or self.end_hour % 4:
            raise InvalidSpecError("window bounds must align to 4-hour bins")
        if self.days is not None and self.days[0] > self.days[1]:
            raise InvalidSpecError("window date range is reversed")

    def covers(self, ts: datetime) -> bool:
        if not (self.start_hour <= ts.hour < self.end_hour):
            return False
        if self.days is not None:
            d = ts.date()
            return self.days[0] <= d <= self.days[1]
        return True


DEFAULT_WINDOW = TimeWindow(8, 24)


@dataclass(frozen=True)
class MetricField:
    """A per-cell scalar field in raw and standardized form."""

    metric_id: str
    raw: Mapping[str, float]
    standardized: Mapping[str, float]
    n_cells: int
    excluded: tuple[str, ...] = ()

    @classmethod
    def from_raw(
        cls, metric_id: str, raw: Mapping[str, float], excluded: Iterable[str] = ()
    ) -> "MetricField":
        return cls(metric_id, dict(raw), standardize(raw), len(raw), tuple(excluded))


def scale_merged_cells(
    visits: Sequence[VisitRecord], grid: CellGrid
) -> dict[tuple[str, datetime, str], float]:
    """Counts divided by each cell's scale factor.

    Merged cells carry the sum of their parts; dividing by the factor makes
    absolute counts comparable across cells.  Ratios are unaffected since
    numerator and denominator scale together.
    """
    scaled: dict[tuple[str, datetime, str], float] = {}
    for rec in visits:
        key = (rec.cell_id, rec.period_start, rec.group)
        scaled[key] = scaled.get(key, 0.0) + rec.count / grid.scale_factor(rec.cell_id)
    return scaled


def ratio(
    visits: Sequence[VisitRecord],
    grid: CellGrid,
    numerator_groups: Iterable[str],
    window: TimeWindow = DEFAULT_WINDOW,
) -> dict[str, float]:
    """Per-cell ratio of numerator-group visits to total visits in window.

    Cells with zero total in the window are omitted; callers report them.
    Raises EmptyWindowError when no record falls inside the window at all.
    """
    numerator_groups = frozenset(numerator_groups)
    num: dict[str, int] = {}
    den: dict[str, int] = {}
    any_in_window = False
    for rec in visits:
        if not window.covers(rec.period_start):
            continue
        any_in_window = True
        if rec.group == "total":
            den[rec.cell_id] = den.get(rec.cell_id, 0) + rec.count
        if rec.group in numerator_groups:
            num[rec.cell_id] = num.get(rec.cell_id, 0) + rec.count
    if not any_in_window:
        raise EmptyWindowError(
            f"no visit record falls in window [{window.start_hour}, {window.end_hour})"
        )
    out: dict[str, float] = {}
    for cell_id in grid.ids:
        total = den.get(cell_id, 0)
        if total > 0:
            out[cell_id] = num.get(cell_id, 0) / total
    return out


def standardize(values: Mapping[str, float]) -> dict[str, float]:
    """z-scores with the sample (n-1) standard deviation.

    Raises DegenerateFieldError when fewer than two values are defined or
    the field is constant.
    """
    if len(values) < 2:
        raise DegenerateFieldError(f"need at least 2 defined cells, got {len(values)}")
    keys = list(values.keys())
    arr = np.asarray([values[k] for k in keys], dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DegenerateFieldError("field contains non-finite values")
    mean = float(arr.mean())
    sd = float(arr.std(ddof=1))
    if sd == 0.0 or not math.isfinite(sd):
        raise DegenerateFieldError("field has zero variance")
    return {k: (v - mean) / sd for k, v in zip(keys, arr.tolist())}


def _numerator_groups(metric_id: str, visits: Sequence[VisitRecord]) -> frozenset[str]:
    if metric_id == "G":
        return frozenset({"female"})
    if metric_id == "T":
        return frozenset({"tourist_national", "tourist_foreign"})
    if metric_id == "E":
        groups = elder_groups({rec.group for rec in visits})
        if not groups:
            warnings.warn("no elder age cohort present; E ratios are zero", stacklevel=2)
        return groups
    raise InvalidSpecError(f"unknown metric '{metric_id}'; expected one of {METRIC_IDS}")


def compute_metric(
    metric_id: str,
    visits: Sequence[VisitRecord],
    grid: CellGrid,
    window: TimeWindow = DEFAULT_WINDOW,
) -> MetricField:
    """Ratio metric for G (female), E (age 65+) or T (tourists), standardized."""
    raw = ratio(visits, grid, _numerator_groups(metric_id, visits), window)
    excluded = tuple(cid for cid in grid.ids if cid not in raw)
    return MetricField.from_raw(metric_id, raw, excluded)
