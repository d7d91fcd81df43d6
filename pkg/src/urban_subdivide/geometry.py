"""Planar operations on the cell grid.

Contiguity uses GEOS predicates with a snapping tolerance so grids
serialized through floating point still connect.  Income is transferred
from neighborhood polygons to cells by intersection-area weighting.
POI points are assigned by containment with a deterministic tie-break.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from shapely.strtree import STRtree

from .errors import InvalidSpecError
from .ingest import CATEGORIES, CellGrid, Neighborhood, PoiRecord

__all__ = [
    "SNAP_TOL",
    "AdjacencyList",
    "IncomeField",
    "PoiTable",
    "build_adjacency",
    "interpolate_income",
    "assign_pois",
]

SNAP_TOL = 1e-6


@dataclass(frozen=True)
class AdjacencyList:
    """Symmetric, irreflexive neighbor lists keyed by cell id."""

    neighbors: Mapping[str, tuple[str, ...]]
    contiguity: str = "queen"
    tol: float = SNAP_TOL

    def islands(self) -> tuple[str, ...]:
        return tuple(cid for cid, nbrs in self.neighbors.items() if not nbrs)

    def degree(self, cell_id: str) -> int:
        return len(self.neighbors[cell_id])


@dataclass(frozen=True)
class IncomeField:
    """Per-cell income with coverage accounting.

    ``income`` has entries only for cells whose covered fraction reached
    the threshold; the rest are listed in ``no_coverage``.
    """

    income: Mapping[str, float]
    covered_fraction: Mapping[str, float]
    no_coverage: tuple[str, ...]
    min_covered_fraction: float = 0.05


@dataclass(frozen=True)
class PoiTable:
    """Per-cell POI counts by category plus the unassigned bucket."""

    categories: tuple[str, ...]
    counts: Mapping[str, Mapping[str, int]]
    unassigned: int = 0

    def cell_total(self, cell_id: str) -> int:
        return sum(self.counts[cell_id].values())

    def category_totals(self) -> dict[str, int]:
        totals = dict.fromkeys(self.categories, 0)
        for row in self.counts.values():
            for cat, n in row.items():
                totals[cat] += n
        return totals

    def grand_total(self) -> int:
        return sum(self.category_totals().values())


def build_adjacency(
    grid: CellGrid, *, contiguity: str = "queen", tol: float = SNAP_TOL
) -> AdjacencyList:
    """Contiguity neighbors of every cell.

    queen: boundaries touch (shared edge or vertex) within ``tol``.
    rook: additionally requires a shared edge segment, not just a point.
    Cells with no neighbors are kept with empty lists (islands).
    """
    if contiguity not in ("queen", "rook"):
        raise InvalidSpecError(f"contiguity must be 'queen' or 'rook', got '{contiguity}'")
    geoms = [c.polygon for c in grid.cells]
    tree = STRtree(geoms)
    if tol > 0:
        left, right = tree.query(geoms, predicate="dwithin", distance=tol)
    else:
        left, right = tree.query(geoms, predicate="intersects")
    pairs: set[tuple[int, int]] = set()
    for i, j in zip(left.tolist(), right.tolist()):
        if i >= j:
            continue
        if contiguity == "rook" and not _shares_edge(geoms[i], geoms[j], tol):
            continue
        pairs.add((i, j))

    nbrs: dict[str, list[str]] = {cid: [] for cid in grid.ids}
    for i, j in pairs:
        nbrs[grid.ids[i]].append(grid.ids[j])
        nbrs[grid.ids[j]].append(grid.ids[i])
    return AdjacencyList(
        {cid: tuple(sorted(ns)) for cid, ns in nbrs.items()},
        contiguity=contiguity,
        tol=tol,
    )


def _shares_edge(a, b, tol: float) -> bool:
    shared = a.boundary.intersection(b.boundary)
    if shared.length > tol:
        return True
    if tol > 0 and a.distance(b) > 0:
        # Boundaries do not meet exactly; measure how much of b's boundary
        # runs within the snap tolerance of a's. A near-corner contact stays
        # O(tol); a near-edge contact spans the shared segment.
        return b.boundary.intersection(a.boundary.buffer(tol)).length > 4 * tol
    return False


def interpolate_income(
    grid: CellGrid,
    neighborhoods: Sequence[Neighborhood],
    *,
    min_covered_fraction: float = 0.05,
) -> IncomeField:
    """Area-weighted income per cell.

    income(cell) = sum_k area(cell ∩ nb_k) * income_k / sum_k area(cell ∩ nb_k).
    Cells whose covered fraction falls below ``min_covered_fraction`` carry
    no income and are reported in ``no_coverage``.
    """
    nb_geoms = [nb.polygon for nb in neighborhoods]
    tree = STRtree(nb_geoms)
    income: dict[str, float] = {}
    covered: dict[str, float] = {}
    uncovered: list[str] = []
    for cell in grid:
        cell_area = cell.polygon.area
        weighted = 0.0
        area_sum = 0.0
        for k in tree.query(cell.polygon, predicate="intersects").tolist():
            a = cell.polygon.intersection(nb_geoms[k]).area
            if a > 0:
                weighted += a * neighborhoods[k].income_index
                area_sum += a
        fraction = area_sum / cell_area
        covered[cell.cell_id] = fraction
        if fraction >= min_covered_fraction and area_sum > 0:
            income[cell.cell_id] = weighted / area_sum
        else:
            uncovered.append(cell.cell_id)
    return IncomeField(income, covered, tuple(uncovered), min_covered_fraction)


def assign_pois(
    grid: CellGrid,
    pois: Sequence[PoiRecord],
    *,
    categories: Sequence[str] = CATEGORIES,
) -> PoiTable:
    """Count POIs per cell and category.

    A point on a shared boundary belongs to the lexicographically smallest
    containing cell_id, so merged and subdivided grids count identically.
    Points inside no cell land in the unassigned bucket.
    """
    from shapely.geometry import Point

    geoms = [c.polygon for c in grid.cells]
    tree = STRtree(geoms)
    counts: dict[str, dict[str, int]] = {
        cid: dict.fromkeys(categories, 0) for cid in grid.ids
    }
    unassigned = 0
    for poi in pois:
        pt = Point(poi.x, poi.y)
        hits = [
            grid.ids[k]
            for k in tree.query(pt, predicate="intersects").tolist()
            if geoms[k].covers(pt)
        ]
        if not hits:
            unassigned += 1
            continue
        counts[min(hits)][poi.category] += 1
    return PoiTable(tuple(categories), counts, unassigned)
