"""Spatial autocorrelation on the cell grid.

Global statistic, with row-standardized weights W and field x:

    I = (N / S0) * sum_ij w_ij (x_i - xbar)(x_j - xbar) / sum_i (x_i - xbar)^2

where S0 is the sum of all weights.  Significance comes from seeded
permutations of the values across locations; the pseudo p-value is
(R + 1) / (M + 1) for exceedance count R over M permutations.

The per-cell statistic divides each cell's cross product by a variance
term.  The default ("global") uses the second moment over all analyzed
cells, so the per-cell values sum to N times the global statistic.  The
alternative ("neighbors") divides by the sample variance of each cell's
neighbor values instead; it is kept for comparability with reported
results but is undefined for cells with fewer than two neighbors or
constant surroundings.

Per-cell significance uses conditional permutation: the cell's own value
stays put while its neighborhood is resampled from the remaining values.
Each cell draws from its own named random stream, so results do not
depend on how the per-cell work is scheduled.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .errors import DegenerateFieldError, InvalidSpecError, TooFewCellsError
from .geometry import AdjacencyList
from .metrics import MetricField
from .streams import substream

__all__ = [
    "HOT",
    "COLD",
    "OUTLIER",
    "NOT_SIGNIFICANT",
    "ISLAND",
    "SPOT_LABELS",
    "WeightMatrix",
    "GlobalMoranResult",
    "CellLocalMoran",
    "LocalMoranResult",
    "SpotClassification",
    "build_weights",
    "global_moran",
    "local_moran",
    "classify_spots",
]

HOT = "hot"
COLD = "cold"
OUTLIER = "outlier"
NOT_SIGNIFICANT = "not_significant"
ISLAND = "island"
SPOT_LABELS = (HOT, COLD, OUTLIER, NOT_SIGNIFICANT, ISLAND)

_SIM_BLOCK = 256


@dataclass(frozen=True)
class WeightMatrix:
    """Row-standardized contiguity weights; islands keep empty rows."""

    rows: Mapping[str, tuple[tuple[str, float], ...]]
    islands: frozenset[str]


def build_weights(adjacency: AdjacencyList) -> WeightMatrix:
    """Binary contiguity turned into row-standardized weights (rows sum to 1)."""
    rows: dict[str, tuple[tuple[str, float], ...]] = {}
    islands = set()
    for cell_id, nbrs in adjacency.neighbors.items():
        if not nbrs:
            rows[cell_id] = ()
            islands.add(cell_id)
        else:
            w = 1.0 / len(nbrs)
            rows[cell_id] = tuple((n, w) for n in nbrs)
    return WeightMatrix(rows, frozenset(islands))


@dataclass(frozen=True)
class GlobalMoranResult:
    I: float
    expected_I: float
    pseudo_p: float
    permutations: int
    n: int
    tail: str
    sim_mean: float
    sim_sd: float


@dataclass(frozen=True)
class CellLocalMoran:
    local_I: float | None
    lag: float | None
    quadrant: str | None
    pseudo_p: float | None
    label: str


@dataclass(frozen=True)
class LocalMoranResult:
    cells: Mapping[str, CellLocalMoran]
    alpha: float
    permutations: int
    variance: str
    alternative: str
    n: int
    correction: str = "none"

    def labels(self) -> dict[str, str]:
        return {cid: c.label for cid, c in self.cells.items()}


@dataclass(frozen=True)
class SpotClassification:
    labels: Mapping[str, str]
    counts: Mapping[str, int]


class _Aligned:
    """Weights and values restricted to analyzable cells.

    Cells with undefined values are dropped and surviving rows are
    re-normalized.  Cells left without neighbors become analysis islands.
    The mean is recomputed over the included cells.
    """

    def __init__(self, values: Mapping[str, float], weights: WeightMatrix):
        defined = {
            cid for cid in weights.rows
            if cid in values and math.isfinite(values[cid])
        }
        self.island_ids: list[str] = []
        included: list[str] = []
        for cid in weights.rows:
            if cid not in defined:
                continue
            if any(n in defined for n, _ in weights.rows[cid]):
                included.append(cid)
            else:
                self.island_ids.append(cid)
        self.ids = included
        self.n = len(included)
        if self.n < 3:
            raise TooFewCellsError(
                f"need at least 3 connected cells with defined values, got {self.n}"
            )
        index = {cid: k for k, cid in enumerate(included)}
        vals = np.asarray([values[cid] for cid in included], dtype=float)
        self.z = vals - vals.mean()
        self.den = float(self.z @ self.z)
        if self.den == 0.0:
            raise DegenerateFieldError("field is constant over the analyzed cells")
        self.m2 = self.den / self.n

        self.nbr_idx: list[np.ndarray] = []
        self.w: list[np.ndarray] = []
        s0 = 0.0
        for cid in included:
            nbrs = [n for n, _ in weights.rows[cid] if n in index]
            k = len(nbrs)
            idx = np.asarray([index[n] for n in nbrs], dtype=np.intp)
            wrow = np.full(k, 1.0 / k)
            self.nbr_idx.append(idx)
            self.w.append(wrow)
            s0 += float(wrow.sum())
        self.s0 = s0
        # flat CSR-like form for vectorized lags
        self.flat_idx = np.concatenate(self.nbr_idx) if included else np.empty(0, np.intp)
        self.flat_w = np.concatenate(self.w)
        self.row_ptr = np.cumsum([0] + [len(ix) for ix in self.nbr_idx])[:-1]

    def lag(self, vec: np.ndarray) -> np.ndarray:
        return np.add.reduceat(vec[self.flat_idx] * self.flat_w, self.row_ptr)

    def lag_rows(self, mat: np.ndarray) -> np.ndarray:
        return np.add.reduceat(mat[:, self.flat_idx] * self.flat_w, self.row_ptr, axis=1)


def _pseudo_p(r_hi: int, r_lo: int, m: int, alternative: str, observed: float) -> tuple[float, str]:
    if alternative == "two-sided":
        return min(1.0, 2.0 * (min(r_hi, r_lo) + 1) / (m + 1)), "two-sided"
    if alternative == "greater":
        return (r_hi + 1) / (m + 1), "greater"
    if alternative == "less":
        return (r_lo + 1) / (m + 1), "less"
    if alternative == "directional":
        if observed >= 0:
            return (r_hi + 1) / (m + 1), "greater"
        return (r_lo + 1) / (m + 1), "less"
    raise InvalidSpecError(
        f"alternative must be 'directional', 'greater', 'less' or 'two-sided', got '{alternative}'"
    )


def global_moran(
    field: MetricField,
    weights: WeightMatrix,
    *,
    permutations: int = 999,
    seed: int = 0,
    alternative: str = "directional",
) -> GlobalMoranResult:
    """Global spatial autocorrelation with a permutation pseudo p-value.

    The default one-sided test takes the tail given by the sign of the
    observed statistic; 'two-sided' doubles the smaller tail.
    """
    if permutations < 1:
        raise InvalidSpecError("permutations must be >= 1")
    al = _Aligned(field.standardized, weights)
    lag = al.lag(al.z)
    scale = al.n / al.s0
    observed = scale * float(al.z @ lag) / al.den

    rng = substream(seed, "moran-global")
    sims = np.empty(permutations)
    done = 0
    while done < permutations:
        block = min(_SIM_BLOCK, permutations - done)
        perm = rng.permuted(np.tile(al.z, (block, 1)), axis=1)
        lags = al.lag_rows(perm)
        sims[done : done + block] = scale * np.einsum("ij,ij->i", perm, lags) / al.den
        done += block
    r_hi = int((sims >= observed).sum())
    r_lo = int((sims <= observed).sum())
    p, tail = _pseudo_p(r_hi, r_lo, permutations, alternative, observed)
    return GlobalMoranResult(
        I=observed,
        expected_I=-1.0 / (al.n - 1),
        pseudo_p=p,
        permutations=permutations,
        n=al.n,
        tail=tail,
        sim_mean=float(sims.mean()),
        # a single permutation has no sample spread
        sim_sd=float(sims.std(ddof=1)) if permutations > 1 else 0.0,
    )


def _quadrant(z_i: float, lag_i: float) -> str:
    hi_val = z_i > 0
    hi_lag = lag_i > 0
    if hi_val:
        return "HH" if hi_lag else "HL"
    return "LH" if hi_lag else "LL"


def _label(quadrant: str, p: float, alpha: float) -> str:
    if not math.isfinite(p) or p > alpha:
        return NOT_SIGNIFICANT
    if quadrant == "HH":
        return HOT
    if quadrant == "LL":
        return COLD
    return OUTLIER


def _fdr_relabel(cells: dict[str, CellLocalMoran], alpha: float) -> dict[str, CellLocalMoran]:
    """Benjamini-Hochberg step-up across tested cells; p-values stay raw."""
    tested = sorted(
        (c.pseudo_p for c in cells.values() if c.pseudo_p is not None)
    )
    if not tested:
        return cells
    t = len(tested)
    cutoff = 0.0
    for rank, p in enumerate(tested, start=1):
        if p <= rank * alpha / t:
            cutoff = p
    # pseudo p-values are >= 1/(M+1), so 0.0 means nothing was rejected
    threshold = cutoff if cutoff > 0.0 else -1.0
    out: dict[str, CellLocalMoran] = {}
    for cid, c in cells.items():
        if c.pseudo_p is None:
            out[cid] = c
        else:
            out[cid] = CellLocalMoran(
                c.local_I, c.lag, c.quadrant, c.pseudo_p,
                _label(c.quadrant, c.pseudo_p, threshold),
            )
    return out


def local_moran(
    field: MetricField,
    weights: WeightMatrix,
    *,
    permutations: int = 999,
    seed: int = 0,
    alpha: float = 0.05,
    variance: str = "global",
    alternative: str = "two-sided",
    correction: str = "none",
    threads: int = 1,
) -> LocalMoranResult:
    """Per-cell spatial association with conditional-permutation p-values.

    Labels: hot for significant high-high, cold for significant low-low,
    outlier for significant high-low / low-high, island for cells with no
    analyzable neighbor.  The default two-sided test keeps the share of
    significant labels near ``alpha`` on noise fields.  With
    correction='fdr' labels use a Benjamini-Hochberg threshold across
    cells instead of plain alpha; reported p-values stay uncorrected.
    """
    if permutations < 1:
        raise InvalidSpecError("permutations must be >= 1")
    if not 0 < alpha < 1:
        raise InvalidSpecError(f"alpha must be in (0, 1), got {alpha}")
    if variance not in ("global", "neighbors"):
        raise InvalidSpecError(f"variance must be 'global' or 'neighbors', got '{variance}'")
    if correction not in ("none", "fdr"):
        raise InvalidSpecError(f"correction must be 'none' or 'fdr', got '{correction}'")
    if threads < 1:
        raise InvalidSpecError("threads must be >= 1")
    al = _Aligned(field.standardized, weights)
    lag = al.lag(al.z)
    m = permutations

    def one_cell(i: int) -> CellLocalMoran:
        z_i = float(al.z[i])
        lag_i = float(lag[i])
        k = len(al.nbr_idx[i])
        if variance == "neighbors":
            if k < 2:
                return CellLocalMoran(None, lag_i, _quadrant(z_i, lag_i), None, NOT_SIGNIFICANT)
            s2 = float(al.z[al.nbr_idx[i]].var(ddof=1))
            if s2 == 0.0:
                return CellLocalMoran(None, lag_i, _quadrant(z_i, lag_i), None, NOT_SIGNIFICANT)
            denom = s2
        else:
            denom = al.m2
        observed = z_i * lag_i / denom

        others = np.delete(al.z, i)
        rng = substream(seed, "moran-local", al.ids[i])
        keys = rng.random((m, others.size))
        take = np.argpartition(keys, k - 1, axis=1)[:, :k]
        sampled = others[take]
        lag_sims = sampled @ al.w[i]
        if variance == "neighbors":
            s2_sims = sampled.var(axis=1, ddof=1)
            with np.errstate(divide="ignore", invalid="ignore"):
                sims = z_i * lag_sims / s2_sims
        else:
            sims = z_i * lag_sims / denom
        r_hi = int((sims >= observed).sum())
        r_lo = int((sims <= observed).sum())
        p, _ = _pseudo_p(r_hi, r_lo, m, alternative, observed)
        quadrant = _quadrant(z_i, lag_i)
        return CellLocalMoran(observed, lag_i, quadrant, p, _label(quadrant, p, alpha))

    if threads == 1:
        computed = [one_cell(i) for i in range(al.n)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            computed = list(pool.map(one_cell, range(al.n)))

    cells: dict[str, CellLocalMoran] = {}
    for cid, stats in zip(al.ids, computed):
        cells[cid] = stats
    for cid in al.island_ids:
        cells[cid] = CellLocalMoran(None, None, None, None, ISLAND)
    # keep grid order for deterministic serialization
    ordered = {cid: cells[cid] for cid in weights.rows if cid in cells}
    if correction == "fdr":
        ordered = _fdr_relabel(ordered, alpha)
    return LocalMoranResult(
        cells=ordered,
        alpha=alpha,
        permutations=permutations,
        variance=variance,
        alternative=alternative,
        n=al.n,
        correction=correction,
    )


def classify_spots(result: LocalMoranResult) -> SpotClassification:
    """Label map plus summary counts over all five label kinds."""
    labels = result.labels()
    counts = dict.fromkeys(SPOT_LABELS, 0)
    for label in labels.values():
        counts[label] += 1
    return SpotClassification(labels, counts)
