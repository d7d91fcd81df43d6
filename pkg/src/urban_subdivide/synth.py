"""Synthetic grids with known ground truth.

Patterns: checkerboard (closed-form negative autocorrelation under rook
contiguity), planted_block (a high block on a noise background),
half_split (high left half, low right half) and random (pure noise).
Fixtures can be extended with visit counts, income polygons and POI
points that encode the field, so the full pipeline can run end to end
against known answers.  Also home to a deliberately naive double-loop
implementation of the global statistic used as a cross-check oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from datetime import datetime
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from shapely.geometry import box, mapping

from .errors import InvalidSpecError
from .fileio import write_csv, write_json
from .geometry import PoiTable
from .ingest import CATEGORIES, Cell, CellGrid, Neighborhood, PoiRecord, VisitRecord, grid_to_geojson
from .metrics import MetricField
from .spatial import WeightMatrix
from .streams import substream

__all__ = [
    "PATTERNS",
    "SYNTH_CRS",
    "BlockSpec",
    "SynthSpec",
    "SynthFixture",
    "cell_name",
    "generate",
    "add_visits",
    "add_income",
    "add_pois",
    "write_fixture",
    "brute_force_moran",
]

PATTERNS = ("checkerboard", "planted_block", "random", "half_split")
SYNTH_CRS = "LOCAL:planar"

DEFAULT_POI_SHARES = {cat: 0.13 for cat in CATEGORIES}
DEFAULT_POI_SHARES["nightlife"] = 0.09


@dataclass(frozen=True)
class BlockSpec:
    row: int
    col: int
    height: int
    width: int
    contrast: float


@dataclass(frozen=True)
class SynthSpec:
    rows: int
    cols: int
    pattern: str
    block: BlockSpec | None = None
    noise_sd: float = 0.0
    seed: int = 0


@dataclass
class SynthFixture:
    spec: SynthSpec
    grid: CellGrid
    field: MetricField
    truth: dict
    visits: list[VisitRecord] | None = None
    neighborhoods: list[Neighborhood] | None = None
    pois: list[PoiRecord] | None = None
    poi_table: PoiTable | None = None
    income_truth: dict[str, float] = dc_field(default_factory=dict)


def cell_name(row: int, col: int) -> str:
    # zero padding keeps lexicographic order equal to row-major order
    return f"r{row:03d}c{col:03d}"


def validate_spec(spec: SynthSpec) -> None:
    if spec.rows < 1 or spec.cols < 1:
        raise InvalidSpecError(f"grid must be at least 1x1, got {spec.rows}x{spec.cols}")
    if spec.pattern not in PATTERNS:
        raise InvalidSpecError(f"pattern must be one of {PATTERNS}, got '{spec.pattern}'")
    if not math.isfinite(spec.noise_sd) or spec.noise_sd < 0:
        raise InvalidSpecError(f"noise_sd must be finite and >= 0, got {spec.noise_sd}")
    if spec.pattern == "random" and spec.noise_sd == 0:
        raise InvalidSpecError("pattern 'random' needs noise_sd > 0")
    if spec.pattern == "planted_block":
        b = spec.block
        if b is None:
            raise InvalidSpecError("pattern 'planted_block' needs a block")
        if b.height < 1 or b.width < 1:
            raise InvalidSpecError("block must be at least 1x1")
        if b.row < 0 or b.col < 0 or b.row + b.height > spec.rows or b.col + b.width > spec.cols:
            raise InvalidSpecError("block does not fit inside the grid")
        if not math.isfinite(b.contrast):
            raise InvalidSpecError("block contrast must be finite")
    elif spec.block is not None:
        raise InvalidSpecError(f"pattern '{spec.pattern}' does not take a block")


def _unit_grid(rows: int, cols: int) -> CellGrid:
    cells = [
        Cell(cell_name(r, c), box(float(c), float(r), float(c + 1), float(r + 1)))
        for r in range(rows)
        for c in range(cols)
    ]
    return CellGrid(cells, crs=SYNTH_CRS)


def generate(spec: SynthSpec) -> SynthFixture:
    """Build the grid and field for a spec, with ground-truth cell sets."""
    validate_spec(spec)
    rng = substream(spec.seed, "field")
    noise = spec.noise_sd * rng.standard_normal((spec.rows, spec.cols))
    base = np.zeros((spec.rows, spec.cols))
    truth: dict = {"pattern": spec.pattern, "high_cells": [], "low_cells": []}

    if spec.pattern == "checkerboard":
        for r in range(spec.rows):
            for c in range(spec.cols):
                base[r, c] = 1.0 if (r + c) % 2 == 0 else -1.0
        truth["high_cells"] = [
            cell_name(r, c) for r in range(spec.rows) for c in range(spec.cols) if (r + c) % 2 == 0
        ]
    elif spec.pattern == "half_split":
        half = spec.cols // 2
        base[:, :half] = 1.0
        base[:, half:] = -1.0
        truth["high_cells"] = [
            cell_name(r, c) for r in range(spec.rows) for c in range(half)
        ]
        truth["low_cells"] = [
            cell_name(r, c) for r in range(spec.rows) for c in range(half, spec.cols)
        ]
    elif spec.pattern == "planted_block":
        b = spec.block
        base[b.row : b.row + b.height, b.col : b.col + b.width] = b.contrast
        block = [
            cell_name(r, c)
            for r in range(b.row, b.row + b.height)
            for c in range(b.col, b.col + b.width)
        ]
        interior = [
            cell_name(r, c)
            for r in range(b.row + 1, b.row + b.height - 1)
            for c in range(b.col + 1, b.col + b.width - 1)
        ]
        far = [
            cell_name(r, c)
            for r in range(spec.rows)
            for c in range(spec.cols)
            if max(
                max(b.row - r, r - (b.row + b.height - 1), 0),
                max(b.col - c, c - (b.col + b.width - 1), 0),
            )
            >= 2
        ]
        truth["high_cells"] = block
        truth["block_interior"] = interior
        truth["far_cells"] = far

    values = base + noise
    raw = {
        cell_name(r, c): float(values[r, c])
        for r in range(spec.rows)
        for c in range(spec.cols)
    }
    fld = MetricField.from_raw("custom", raw)
    return SynthFixture(spec, _unit_grid(spec.rows, spec.cols), fld, truth)


def add_visits(fixture: SynthFixture, *, total: int = 10000) -> None:
    """Encode the field as female/total counts in one evening period.

    The female share is an affine map of the raw field into [0.05, 0.95],
    so the standardized G ratio reproduces the standardized field up to
    count quantization.
    """
    period = datetime(2018, 3, 5, 8, 0, 0)
    max_abs = max((abs(v) for v in fixture.field.raw.values()), default=0.0)
    scale = 0.45 / max_abs if max_abs > 0 else 0.0
    records = []
    for cid in fixture.grid.ids:
        share = 0.5 + scale * fixture.field.raw[cid]
        records.append(VisitRecord(cid, period, "total", total))
        records.append(VisitRecord(cid, period, "female", round(share * total)))
    fixture.visits = records


def add_income(
    fixture: SynthFixture,
    *,
    mean: float = 100.0,
    sd: float = 10.0,
    boost_sigmas: float = 2.0,
) -> None:
    """One income polygon per cell; high-truth cells get mean + boost_sigmas*sd."""
    rng = substream(fixture.spec.seed, "income")
    values = mean + sd * rng.standard_normal(len(fixture.grid))
    high = set(fixture.truth["high_cells"])
    nbs = []
    income_truth = {}
    for k, cell in enumerate(fixture.grid):
        v = float(values[k])
        if cell.cell_id in high:
            v += boost_sigmas * sd
        v = max(v, 1.0)  # loader requires positive income
        income_truth[cell.cell_id] = v
        nbs.append(Neighborhood(f"nb_{cell.cell_id}", v, cell.polygon))
    fixture.neighborhoods = nbs
    fixture.income_truth = income_truth


def add_pois(
    fixture: SynthFixture,
    *,
    base_total: int = 150,
    boost_category: str = "nightlife",
    boost_factor: int = 2,
    shares: Mapping[str, float] | None = None,
) -> None:
    """Scatter POI points per cell with Poisson category counts.

    High-truth cells get ``boost_factor`` times the boosted category.  The
    default shares put the boosted category at 0.09 and the rest at 0.13,
    a composition whose entropy is nearly unchanged by doubling it.
    """
    if shares is None:
        shares = DEFAULT_POI_SHARES
    if boost_category not in CATEGORIES:
        raise InvalidSpecError(f"unknown boost category '{boost_category}'")
    high = set(fixture.truth["high_cells"])
    pois: list[PoiRecord] = []
    counts: dict[str, dict[str, int]] = {}
    for cell in fixture.grid:
        rng = substream(fixture.spec.seed, "poi", cell.cell_id)
        row: dict[str, int] = {}
        for cat in CATEGORIES:
            lam = base_total * shares[cat]
            k = int(rng.poisson(lam))
            if cat == boost_category and cell.cell_id in high:
                k *= boost_factor
            row[cat] = k
        counts[cell.cell_id] = row
        minx, miny, maxx, maxy = cell.polygon.bounds
        mx = 0.02 * (maxx - minx)
        my = 0.02 * (maxy - miny)
        for cat in CATEGORIES:
            for _ in range(row[cat]):
                x = rng.uniform(minx + mx, maxx - mx)
                y = rng.uniform(miny + my, maxy - my)
                pois.append(PoiRecord(float(x), float(y), cat))
    fixture.pois = pois
    fixture.poi_table = PoiTable(CATEGORIES, counts, unassigned=0)


def write_fixture(fixture: SynthFixture, out_dir) -> dict[str, Path]:
    """Write whichever fixture parts exist, in the ingest file formats."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}

    paths["grid"] = out / "grid.geojson"
    write_json(paths["grid"], grid_to_geojson(fixture.grid))

    paths["field"] = out / "field.csv"
    write_csv(
        paths["field"],
        ("cell_id", "raw", "standardized"),
        [
            (cid, fixture.field.raw[cid], fixture.field.standardized[cid])
            for cid in fixture.grid.ids
            if cid in fixture.field.raw
        ],
    )

    if fixture.visits is not None:
        paths["visits"] = out / "visits.csv"
        write_csv(
            paths["visits"],
            ("cell_id", "period_start", "group", "count"),
            [
                (rec.cell_id, rec.period_start.isoformat(), rec.group, rec.count)
                for rec in fixture.visits
            ],
        )

    if fixture.neighborhoods is not None:
        paths["neighborhoods"] = out / "neighborhoods.geojson"
        features = [
            {
                "type": "Feature",
                "properties": {"name": nb.name, "income_index": nb.income_index},
                "geometry": mapping(nb.polygon),
            }
            for nb in fixture.neighborhoods
        ]
        write_json(
            paths["neighborhoods"],
            {
                "type": "FeatureCollection",
                "crs": {"type": "name", "properties": {"name": SYNTH_CRS}},
                "features": features,
            },
        )

    if fixture.pois is not None:
        paths["pois"] = out / "pois.csv"
        write_csv(paths["pois"], ("x", "y", "category"), [(p.x, p.y, p.category) for p in fixture.pois])

    paths["truth"] = out / "truth.json"
    write_json(paths["truth"], fixture.truth)
    return paths


def brute_force_moran(field: MetricField | Mapping[str, float], weights: WeightMatrix) -> float:
    """Double-loop global statistic, kept naive on purpose as an oracle.

    Uses the stored weights as-is; intended for fully defined fields
    without islands.
    """
    values = field.standardized if isinstance(field, MetricField) else field
    ids = [cid for cid in weights.rows if cid in values]
    n = len(ids)
    xbar = sum(values[cid] for cid in ids) / n
    num = 0.0
    s0 = 0.0
    for cid in ids:
        zi = values[cid] - xbar
        for nbr, w in weights.rows[cid]:
            num += w * zi * (values[nbr] - xbar)
            s0 += w
    den = sum((values[cid] - xbar) ** 2 for cid in ids)
    return (n / s0) * num / den
