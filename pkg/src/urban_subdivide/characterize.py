"""Comparisons between hot and cold cells.

Three lenses: the income level of the ground each spot sits on, the kind
of activity hosted there (per-category log-odds of POI composition with a
smoothing Dirichlet prior), and the diversity of that activity (Shannon
entropy of the category distribution).  Distributional differences are
tested with the two-sample Kolmogorov-Smirnov statistic; p-values are
Bonferroni-adjusted by the number of comparisons in the reporting family.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .errors import EmptySampleError, InvalidSpecError, NoSpotsError
from .geometry import IncomeField, PoiTable
from .spatial import COLD, HOT

__all__ = [
    "KsTestResult",
    "PoiAssociation",
    "EntropyField",
    "ks_two_sample",
    "compare_income",
    "poi_log_odds",
    "compare_poi_association",
    "poi_entropy",
    "compare_entropy",
    "ecdf_points",
]

EXACT_MAX_N = 12


@dataclass(frozen=True)
class KsTestResult:
    statistic: float
    p_value: float
    p_bonferroni: float
    n_hot: int
    n_cold: int
    method: str


@dataclass(frozen=True)
class PoiAssociation:
    """Per-cell, per-category log-odds against the whole-corpus baseline."""

    categories: tuple[str, ...]
    delta: Mapping[str, Mapping[str, float]]
    alpha_prior: float


@dataclass(frozen=True)
class EntropyField:
    """Shannon entropy of each cell's POI category distribution (natural log)."""

    entropy: Mapping[str, float]
    n_pois: Mapping[str, int]
    empty_cells: tuple[str, ...]
    n_categories: int


def _kolmogorov_sf(t: float) -> float:
    """P(sup|B(F)| > t) for the Kolmogorov distribution.

    Uses the alternating series 2*sum (-1)^(k-1) exp(-2 k^2 t^2) for large
    t and its theta-function dual for small t, where the alternating form
    converges slowly.
    """
    if t <= 0:
        return 1.0
    if t < 1.0:
        s = 0.0
        for k in range(1, 40):
            term = math.exp(-((2 * k - 1) ** 2) * math.pi**2 / (8.0 * t * t))
            s += term
            if term <= 1e-18 * s:
                break
        return min(1.0, max(0.0, 1.0 - math.sqrt(2.0 * math.pi) / t * s))
    s = 0.0
    for k in range(1, 40):
        term = (-1.0) ** (k - 1) * math.exp(-2.0 * k * k * t * t)
        s += term
        if abs(term) <= 1e-18 * abs(s):
            break
    return min(1.0, max(0.0, 2.0 * s))


def _statistic_numerator(a: np.ndarray, b: np.ndarray) -> int:
    """max over thresholds of |i*m - j*n| where i, j count values <= t."""
    n, m = a.size, b.size
    thresholds = np.unique(np.concatenate([a, b]))
    i = np.searchsorted(a, thresholds, side="right").astype(np.int64)
    j = np.searchsorted(b, thresholds, side="right").astype(np.int64)
    return int(np.abs(i * m - j * n).max())


def _exact_p(d_num: int, n: int, m: int) -> float:
    """P(D >= observed) by counting lattice paths that stay under the band.

    Exact for continuous data (no ties): every interleaving of the pooled
    sample is equally likely; a path through (i, j) attains distance
    |i*m - j*n| / (n*m).  Integer arithmetic throughout.
    """
    if d_num <= 0:
        return 1.0
    prev = [0] * (m + 1)
    prev[0] = 1
    for j in range(1, m + 1):
        prev[j] = prev[j - 1] if j * n < d_num else 0
    for i in range(1, n + 1):
        cur = [0] * (m + 1)
        cur[0] = prev[0] if i * m < d_num else 0
        for j in range(1, m + 1):
            if abs(i * m - j * n) < d_num:
                cur[j] = cur[j - 1] + prev[j]
        prev = cur
    total = math.comb(n + m, n)
    return float(Fraction(total - prev[m], total))


def ks_two_sample(
    sample_hot: Sequence[float],
    sample_cold: Sequence[float],
    *,
    method: str = "asymptotic",
    bonferroni_m: int = 1,
) -> KsTestResult:
    """Two-sample Kolmogorov-Smirnov test.

    The statistic is the exact sup distance between the two empirical
    CDFs.  'asymptotic' evaluates the Kolmogorov distribution at
    sqrt(n*m/(n+m)) * D; it is approximate below about 10 per side.
    'exact' enumerates lattice paths (intended for sides up to 12;
    falls back to asymptotic when the pooled sample has ties).
    'auto' picks exact when sizes allow.
    """
    if method not in ("asymptotic", "exact", "auto"):
        raise InvalidSpecError(f"method must be 'asymptotic', 'exact' or 'auto', got '{method}'")
    if bonferroni_m < 1:
        raise InvalidSpecError("bonferroni_m must be >= 1")
    a = np.sort(np.asarray(sample_hot, dtype=float))
    b = np.sort(np.asarray(sample_cold, dtype=float))
    if a.size == 0 or b.size == 0:
        raise EmptySampleError(f"both samples must be non-empty, got sizes {a.size} and {b.size}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise EmptySampleError("samples must contain only finite values")
    n, m = int(a.size), int(b.size)
    d_num = _statistic_numerator(a, b)
    statistic = d_num / (n * m)

    ties = np.unique(np.concatenate([a, b])).size < n + m
    use_exact = method == "exact" or (method == "auto" and max(n, m) <= EXACT_MAX_N)
    if use_exact and ties:
        warnings.warn("pooled sample has ties; exact KS p falls back to asymptotic", stacklevel=2)
        use_exact = False
    if use_exact:
        p = _exact_p(d_num, n, m)
        method_used = "exact"
    else:
        effective = n * m / (n + m)
        p = _kolmogorov_sf(math.sqrt(effective) * statistic)
        method_used = "asymptotic"
    return KsTestResult(
        statistic=statistic,
        p_value=p,
        p_bonferroni=min(1.0, bonferroni_m * p),
        n_hot=n,
        n_cold=m,
        method=method_used,
    )


def _split(labels: Mapping[str, str], values: Mapping[str, float], what: str):
    hot_ids = [cid for cid, lab in labels.items() if lab == HOT]
    cold_ids = [cid for cid, lab in labels.items() if lab == COLD]
    if not hot_ids or not cold_ids:
        raise NoSpotsError(
            f"{what}: need both hot and cold cells, got {len(hot_ids)} hot / {len(cold_ids)} cold"
        )
    hot = [values[cid] for cid in hot_ids if cid in values]
    cold = [values[cid] for cid in cold_ids if cid in values]
    if not hot or not cold:
        raise EmptySampleError(f"{what}: no defined values on one side of the comparison")
    return hot, cold


def compare_income(
    labels: Mapping[str, str],
    income: IncomeField,
    *,
    method: str = "asymptotic",
    bonferroni_m: int = 1,
) -> KsTestResult:
    """KS test of income distributions, hot cells against cold cells."""
    hot, cold = _split(labels, income.income, "income comparison")
    return ks_two_sample(hot, cold, method=method, bonferroni_m=bonferroni_m)


def poi_log_odds(table: PoiTable, *, alpha_prior: float = 0.5) -> PoiAssociation:
    """Smoothed log-odds of each category in each cell against the corpus.

    With cell counts y_iw, cell total n_i, corpus counts y_w, corpus total
    n, prior weight a = alpha_prior per category and a0 = K * alpha_prior:

        delta_iw = log[(y_iw + a) / (n_i + a0 - y_iw - a)]
                 - log[(y_w  + a) / (n  + a0 - y_w  - a)]

    The corpus side includes the cell itself.  Defined for zero-count
    cells thanks to the prior.
    """
    if alpha_prior <= 0:
        raise InvalidSpecError(f"alpha_prior must be > 0, got {alpha_prior}")
    cats = table.categories
    if len(cats) < 2:
        raise InvalidSpecError("log-odds needs at least 2 categories")
    a = alpha_prior
    a0 = len(cats) * alpha_prior
    corpus = table.category_totals()
    n = sum(corpus.values())
    base = {
        cat: math.log((corpus[cat] + a) / (n + a0 - corpus[cat] - a)) for cat in cats
    }
    delta: dict[str, dict[str, float]] = {}
    for cell_id, row in table.counts.items():
        n_i = sum(row.values())
        delta[cell_id] = {
            cat: math.log((row[cat] + a) / (n_i + a0 - row[cat] - a)) - base[cat]
            for cat in cats
        }
    return PoiAssociation(tuple(cats), delta, alpha_prior)


def compare_poi_association(
    assoc: PoiAssociation,
    labels: Mapping[str, str],
    *,
    method: str = "asymptotic",
    bonferroni_m: int | None = None,
) -> dict[str, KsTestResult]:
    """Per-category KS tests of hot vs cold log-odds distributions.

    The default Bonferroni factor is the number of categories; callers
    testing several metrics multiply that in.
    """
    if bonferroni_m is None:
        bonferroni_m = len(assoc.categories)
    out: dict[str, KsTestResult] = {}
    for cat in assoc.categories:
        values = {cid: row[cat] for cid, row in assoc.delta.items()}
        hot, cold = _split(labels, values, f"category '{cat}'")
        out[cat] = ks_two_sample(hot, cold, method=method, bonferroni_m=bonferroni_m)
    return out


def poi_entropy(table: PoiTable) -> EntropyField:
    """Shannon entropy of category shares per cell; empty cells are set aside."""
    entropy: dict[str, float] = {}
    n_pois: dict[str, int] = {}
    empty: list[str] = []
    for cell_id, row in table.counts.items():
        total = sum(row.values())
        if total == 0:
            empty.append(cell_id)
            continue
        h = 0.0
        for count in row.values():
            if count > 0:
                p = count / total
                h -= p * math.log(p)
        entropy[cell_id] = h
        n_pois[cell_id] = total
    return EntropyField(entropy, n_pois, tuple(empty), len(table.categories))


def compare_entropy(
    field: EntropyField,
    labels: Mapping[str, str],
    *,
    method: str = "asymptotic",
    bonferroni_m: int = 1,
) -> KsTestResult:
    """KS test of entropy distributions, hot cells against cold cells."""
    hot, cold = _split(labels, field.entropy, "entropy comparison")
    return ks_two_sample(hot, cold, method=method, bonferroni_m=bonferroni_m)


def ecdf_points(sample: Sequence[float]) -> list[tuple[float, float]]:
    """Right-continuous ECDF evaluated at each distinct sample value."""
    arr = np.sort(np.asarray(sample, dtype=float))
    if arr.size == 0:
        return []
    values = np.unique(arr)
    counts = np.searchsorted(arr, values, side="right")
    return [(float(v), float(c) / arr.size) for v, c in zip(values, counts)]
