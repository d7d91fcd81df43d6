from __future__ import annotations

from datetime import datetime

import pytest
from shapely.geometry import box

from urban_subdivide.ingest import Cell, CellGrid, VisitRecord
from urban_subdivide.metrics import MetricField


def square_grid(rows: int, cols: int, *, size: float = 1.0, crs: str | None = "LOCAL:test") -> CellGrid:
    cells = []
    for r in range(rows):
        for c in range(cols):
            x0, y0 = c * size, r * size
            cells.append(Cell(f"r{r:03d}c{c:03d}", box(x0, y0, x0 + size, y0 + size)))
    return CellGrid(cells, crs=crs)


def field_from(values: dict[str, float], metric_id: str = "G") -> MetricField:
    """Field whose standardized values are exactly the given ones."""
    return MetricField(
        metric_id=metric_id,
        raw=dict(values),
        standardized=dict(values),
        n_cells=len(values),
        excluded=(),
    )


def visit(cell_id: str, hour: int, group: str, count: int, day: int = 5) -> VisitRecord:
    return VisitRecord(cell_id, datetime(2018, 3, day, hour), group, count)


@pytest.fixture
def grid3() -> CellGrid:
    return square_grid(3, 3)


@pytest.fixture
def grid4() -> CellGrid:
    return square_grid(4, 4)
