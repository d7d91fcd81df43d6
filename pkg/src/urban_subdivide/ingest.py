"""Input loading and validation.

Four input kinds: the analysis grid (GeoJSON polygons), visit counts
(long CSV), neighborhood income polygons (GeoJSON) and points of interest
(CSV or GeoJSON points).  Validation is total: every malformed input is
rejected with exactly one named error from :mod:`urban_subdivide.errors`.
"""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass, field
from datetime import datetime
from typing import Any, Iterable, Iterator, Sequence

from shapely.geometry import mapping, shape
from shapely.geometry.base import BaseGeometry
from shapely.strtree import STRtree

from .errors import (
    DuplicateCellIdError,
    GeographicCrsError,
    InvalidPolygonError,
    MisalignedPeriodError,
    MissingPropertyError,
    NegativeCountError,
    OverlappingCellsError,
    SubgroupExceedsTotalError,
    UnknownCategoryError,
    UnknownCellError,
    UnknownGroupError,
)
from .fileio import read_csv_strict, read_json

__all__ = [
    "PERIOD_HOURS",
    "CATEGORIES",
    "BASE_GROUPS",
    "Cell",
    "CellGrid",
    "VisitRecord",
    "Neighborhood",
    "PoiRecord",
    "load_grid",
    "load_visits",
    "load_neighborhoods",
    "load_pois",
    "parse_group",
    "age_lower_bound",
    "elder_groups",
    "grid_to_geojson",
]

PERIOD_HOURS = 4

CATEGORIES: tuple[str, ...] = (
    "public_transport",
    "shops_services",
    "food",
    "leisure",
    "nightlife",
    "accommodation",
    "education",
    "health",
)

BASE_GROUPS = frozenset(
    {"total", "female", "male", "tourist_national", "tourist_foreign", "elder"}
)

_AGE_RANGE = re.compile(r"^age_(\d+)_(\d+)$")
_AGE_OPEN = re.compile(r"^age_(\d+)_plus$")

_GEOGRAPHIC_CRS_TOKENS = ("4326", "crs84", "wgs84", "wgs 84")

VISITS_HEADER = ("cell_id", "period_start", "group", "count")
POIS_HEADER = ("x", "y", "category")


def parse_group(label: str) -> str:
    """Validate a group label, returning it unchanged."""
    if label in BASE_GROUPS or _AGE_RANGE.match(label) or _AGE_OPEN.match(label):
        m = _AGE_RANGE.match(label)
        if m and int(m.group(1)) >= int(m.group(2)):
            raise UnknownGroupError(f"age range '{label}' has lower bound >= upper bound")
        return label
    raise UnknownGroupError(
        f"unknown group '{label}'; expected one of {sorted(BASE_GROUPS)}, "
        "'age_<lo>_<hi>' or 'age_<lo>_plus'"
    )


def age_lower_bound(label: str) -> int | None:
    """Lower age bound of a cohort label, or None for non-age groups."""
    if label == "elder":
        return 65
    m = _AGE_RANGE.match(label) or _AGE_OPEN.match(label)
    return int(m.group(1)) if m else None


def elder_groups(labels: Iterable[str]) -> frozenset[str]:
    """Labels counting toward the elder numerator: age lower bound >= 65."""
    out = set()
    for label in labels:
        lo = age_lower_bound(label)
        if lo is not None and lo >= 65:
            out.add(label)
    return frozenset(out)


@dataclass
class Cell:
    cell_id: str
    polygon: BaseGeometry
    scale_factor: int = 1


class CellGrid:
    """Ordered collection of named, non-overlapping polygonal cells."""

    def __init__(self, cells: Sequence[Cell], crs: str | None = None):
        self.cells: tuple[Cell, ...] = tuple(cells)
        self.crs = crs
        self.ids: tuple[str, ...] = tuple(c.cell_id for c in self.cells)
        self.by_id: dict[str, Cell] = {c.cell_id: c for c in self.cells}

    def __len__(self) -> int:
        return len(self.cells)

    def __iter__(self) -> Iterator[Cell]:
        return iter(self.cells)

    def __contains__(self, cell_id: str) -> bool:
        return cell_id in self.by_id

    def polygon(self, cell_id: str) -> BaseGeometry:
        return self.by_id[cell_id].polygon

    def scale_factor(self, cell_id: str) -> int:
        return self.by_id[cell_id].scale_factor

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CellGrid):
            return NotImplemented
        if self.ids != other.ids or self.crs != other.crs:
            return False
        for a, b in zip(self.cells, other.cells):
            if a.scale_factor != b.scale_factor:
                return False
            if not a.polygon.equals_exact(b.polygon, tolerance=0.0):
                return False
        return True

    def __repr__(self) -> str:
        return f"CellGrid({len(self)} cells, crs={self.crs!r})"


@dataclass(frozen=True)
class VisitRecord:
    cell_id: str
    period_start: datetime
    group: str
    count: int


@dataclass(frozen=True)
class Neighborhood:
    name: str
    income_index: float
    polygon: BaseGeometry = field(compare=False)


@dataclass(frozen=True)
class PoiRecord:
    x: float
    y: float
    category: str


def _crs_name(doc: dict) -> str | None:
    crs = doc.get("crs")
    if crs is None:
        return None
    if isinstance(crs, str):
        return crs
    if isinstance(crs, dict):
        name = crs.get("properties", {}).get("name")
        if isinstance(name, str):
            return name
    return None


def _check_crs(doc: dict, path: Any) -> str | None:
    name = _crs_name(doc)
    if name is not None:
        lowered = name.lower()
        if any(tok in lowered for tok in _GEOGRAPHIC_CRS_TOKENS):
            raise GeographicCrsError(
                f"{path}: CRS '{name}' is geographic; areas and distances need "
                "projected planar coordinates"
            )
    return name


def _features(doc: dict, path: Any) -> list[dict]:
    if not isinstance(doc, dict) or doc.get("type") != "FeatureCollection":
        raise MissingPropertyError(f"{path}: expected a GeoJSON FeatureCollection")
    feats = doc.get("features")
    if not isinstance(feats, list):
        raise MissingPropertyError(f"{path}: FeatureCollection has no feature list")
    return feats


def _polygonal(geom_dict: Any, where: str) -> BaseGeometry:
    if not isinstance(geom_dict, dict):
        raise InvalidPolygonError(f"{where}: missing geometry")
    try:
        geom = shape(geom_dict)
    except Exception as exc:
        raise InvalidPolygonError(f"{where}: unreadable geometry ({exc})") from exc
    if geom.geom_type not in ("Polygon", "MultiPolygon"):
        raise InvalidPolygonError(f"{where}: expected Polygon or MultiPolygon, got {geom.geom_type}")
    if not geom.is_valid:
        raise InvalidPolygonError(f"{where}: invalid polygon (self-intersection or bad ring)")
    if geom.area <= 0:
        raise InvalidPolygonError(f"{where}: polygon has zero area")
    return geom


def _warn_if_degree_like(geom_bounds: tuple[float, float, float, float], path: Any) -> None:
    minx, miny, maxx, maxy = geom_bounds
    if -180 <= minx and maxx <= 180 and -90 <= miny and maxy <= 90:
        warnings.warn(
            f"{path}: no CRS declared and coordinates fit in degree ranges; "
            "values are treated as planar units",
            stacklevel=3,
        )


def load_grid(path: Any, *, overlap_tol: float = 1e-6) -> CellGrid:
    """Load and validate the cell grid.

    Cells must be valid polygons with unique string ``cell_id`` properties
    and pairwise disjoint interiors (overlap area above ``overlap_tol``
    is rejected).  ``scale_factor`` defaults to 1 on unmerged cells.
    """
    doc = read_json(path)
    crs = _check_crs(doc, path)
    cells: list[Cell] = []
    seen: set[str] = set()
    for k, feat in enumerate(_features(doc, path)):
        where = f"{path}: feature {k}"
        props = feat.get("properties") or {}
        cell_id = props.get("cell_id")
        if not isinstance(cell_id, str) or not cell_id:
            raise MissingPropertyError(f"{where}: 'cell_id' must be a non-empty string")
        if cell_id in seen:
            raise DuplicateCellIdError(f"{path}: duplicate cell_id '{cell_id}'")
        seen.add(cell_id)
        factor = props.get("scale_factor", 1)
        if isinstance(factor, bool) or not isinstance(factor, int) or factor < 1:
            raise MissingPropertyError(
                f"{where}: 'scale_factor' must be a positive integer, got {factor!r}"
            )
        geom = _polygonal(feat.get("geometry"), where)
        cells.append(Cell(cell_id, geom, factor))
    if not cells:
        raise MissingPropertyError(f"{path}: grid has no cells")

    geoms = [c.polygon for c in cells]
    tree = STRtree(geoms)
    left, right = tree.query(geoms, predicate="intersects")
    for i, j in zip(left.tolist(), right.tolist()):
        if i >= j:
            continue
        area = geoms[i].intersection(geoms[j]).area
        if area > overlap_tol:
            raise OverlappingCellsError(
                f"{path}: cells '{cells[i].cell_id}' and '{cells[j].cell_id}' "
                f"overlap by area {area:g}"
            )

    if crs is None:
        minx = min(g.bounds[0] for g in geoms)
        miny = min(g.bounds[1] for g in geoms)
        maxx = max(g.bounds[2] for g in geoms)
        maxy = max(g.bounds[3] for g in geoms)
        _warn_if_degree_like((minx, miny, maxx, maxy), path)
    return CellGrid(cells, crs=crs)


def _parse_period(text: str, where: str) -> datetime:
    try:
        ts = datetime.fromisoformat(text)
    except ValueError as exc:
        raise MisalignedPeriodError(f"{where}: '{text}' is not an ISO-8601 timestamp") from exc
    if ts.tzinfo is not None:
        raise MisalignedPeriodError(f"{where}: timestamps must be timezone-naive, got '{text}'")
    if ts.hour % PERIOD_HOURS != 0 or ts.minute or ts.second or ts.microsecond:
        raise MisalignedPeriodError(
            f"{where}: '{text}' does not start a {PERIOD_HOURS}-hour bin"
        )
    return ts


def _parse_count(text: str, where: str) -> int:
    try:
        count = int(text)
    except ValueError as exc:
        raise NegativeCountError(f"{where}: count must be a non-negative integer, got '{text}'") from exc
    if count < 0:
        raise NegativeCountError(f"{where}: count must be non-negative, got {count}")
    return count


def _check_subgroup_sums(records: list[VisitRecord]) -> None:
    sums: dict[tuple[str, datetime], dict[str, int]] = {}
    for rec in records:
        bucket = sums.setdefault((rec.cell_id, rec.period_start), {})
        bucket[rec.group] = bucket.get(rec.group, 0) + rec.count

    missing_total = 0
    for (cell_id, period), bucket in sums.items():
        total = bucket.get("total")
        if total is None:
            if any(v > 0 for v in bucket.values()):
                missing_total += 1
            continue
        where = f"cell '{cell_id}' period {period.isoformat()}"
        for group, count in bucket.items():
            if group != "total" and count > total:
                raise SubgroupExceedsTotalError(
                    f"{where}: group '{group}' count {count} exceeds total {total}"
                )
        if bucket.get("female", 0) + bucket.get("male", 0) > total:
            raise SubgroupExceedsTotalError(f"{where}: female + male exceeds total")
        if bucket.get("tourist_national", 0) + bucket.get("tourist_foreign", 0) > total:
            raise SubgroupExceedsTotalError(f"{where}: tourist groups exceed total")
        age_sum = sum(c for g, c in bucket.items() if age_lower_bound(g) is not None)
        if age_sum > total:
            raise SubgroupExceedsTotalError(f"{where}: age cohort counts exceed total")
    if missing_total:
        warnings.warn(
            f"{missing_total} cell-period pair(s) have subgroup counts but no 'total' row; "
            "missing rows count as zero",
            stacklevel=3,
        )


def load_visits(path: Any, grid: CellGrid) -> list[VisitRecord]:
    """Load visit counts in long format.

    Header must be exactly ``cell_id,period_start,group,count``.  Rows for
    the same (cell, period, group) accumulate.  Missing combinations are
    treated as zero by downstream aggregation.
    """
    rows = read_csv_strict(path, VISITS_HEADER)
    records: list[VisitRecord] = []
    for lineno, row in enumerate(rows, start=2):
        where = f"{path}:{lineno}"
        cell_id = row["cell_id"]
        if cell_id not in grid:
            raise UnknownCellError(f"{where}: cell '{cell_id}' is not in the grid")
        group = row["group"]
        try:
            parse_group(group)
        except UnknownGroupError as exc:
            raise UnknownGroupError(f"{where}: {exc}") from None
        period = _parse_period(row["period_start"], where)
        count = _parse_count(row["count"], where)
        records.append(VisitRecord(cell_id, period, group, count))
    _check_subgroup_sums(records)
    return records


def load_neighborhoods(path: Any) -> list[Neighborhood]:
    """Load income polygons: properties ``name`` and positive ``income_index``."""
    doc = read_json(path)
    _check_crs(doc, path)
    out: list[Neighborhood] = []
    for k, feat in enumerate(_features(doc, path)):
        where = f"{path}: feature {k}"
        props = feat.get("properties") or {}
        name = props.get("name")
        if not isinstance(name, str) or not name:
            raise MissingPropertyError(f"{where}: 'name' must be a non-empty string")
        income = props.get("income_index")
        if isinstance(income, bool) or not isinstance(income, (int, float)):
            raise MissingPropertyError(f"{where}: 'income_index' must be a number")
        income = float(income)
        if not math.isfinite(income) or income <= 0:
            raise MissingPropertyError(f"{where}: 'income_index' must be finite and > 0")
        geom = _polygonal(feat.get("geometry"), where)
        out.append(Neighborhood(name, income, geom))
    if not out:
        raise MissingPropertyError(f"{path}: no neighborhoods")
    return out


def _parse_coord(text: Any, where: str, axis: str) -> float:
    try:
        value = float(text)
    except (TypeError, ValueError) as exc:
        raise MissingPropertyError(f"{where}: {axis} must be a number, got {text!r}") from exc
    if not math.isfinite(value):
        raise MissingPropertyError(f"{where}: {axis} must be finite")
    return value


def load_pois(path: Any, *, categories: Sequence[str] = CATEGORIES) -> list[PoiRecord]:
    """Load points of interest from CSV (``x,y,category``) or GeoJSON points."""
    allowed = set(categories)
    text = str(path)
    records: list[PoiRecord] = []
    if text.endswith((".json", ".geojson")):
        doc = read_json(path)
        _check_crs(doc, path)
        for k, feat in enumerate(_features(doc, path)):
            where = f"{path}: feature {k}"
            geom = feat.get("geometry") or {}
            if geom.get("type") != "Point":
                raise MissingPropertyError(f"{where}: expected Point geometry")
            coords = geom.get("coordinates") or []
            if len(coords) < 2:
                raise MissingPropertyError(f"{where}: point needs x and y")
            x = _parse_coord(coords[0], where, "x")
            y = _parse_coord(coords[1], where, "y")
            category = (feat.get("properties") or {}).get("category")
            if category not in allowed:
                raise UnknownCategoryError(f"{where}: unknown category {category!r}")
            records.append(PoiRecord(x, y, category))
    else:
        for lineno, row in enumerate(read_csv_strict(path, POIS_HEADER), start=2):
            where = f"{path}:{lineno}"
            x = _parse_coord(row["x"], where, "x")
            y = _parse_coord(row["y"], where, "y")
            category = row["category"]
            if category not in allowed:
                raise UnknownCategoryError(f"{where}: unknown category '{category}'")
            records.append(PoiRecord(x, y, category))
    return records


def grid_to_geojson(grid: CellGrid) -> dict:
    """GeoJSON document that round-trips through :func:`load_grid`."""
    features = []
    for cell in grid:
        props: dict[str, Any] = {"cell_id": cell.cell_id}
        if cell.scale_factor != 1:
            props["scale_factor"] = cell.scale_factor
        features.append(
            {"type": "Feature", "properties": props, "geometry": mapping(cell.polygon)}
        )
    doc: dict[str, Any] = {"type": "FeatureCollection", "features": features}
    if grid.crs is not None:
        doc["crs"] = {"type": "name", "properties": {"name": grid.crs}}
    return doc
