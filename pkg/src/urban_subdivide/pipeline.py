"""End-to-end run orchestration and file emission.

A run stages all outputs into a scratch directory and renames it into
place only on success, so a failed run leaves no partial outputs.  The
report embeds the fully resolved configuration and a hash manifest of
every emitted file.  Nothing time- or host-dependent is written: two
runs with the same inputs, configuration and seed are byte-identical
regardless of thread count.
"""

from __future__ import annotations

import math
import shutil
import warnings
from importlib.metadata import PackageNotFoundError, version as _pkg_version
from pathlib import Path
from typing import Any, Mapping, Sequence

from . import characterize as chz
from . import geometry, ingest, metrics, spatial
from .config import RunConfig
from .errors import (
    ConfigError,
    EmptySampleError,
    MissingPropertyError,
    NoSpotsError,
    PipelineError,
)
from .fileio import read_csv_strict, read_json, sha256_file, write_csv, write_json
from .metrics import MetricField
from .streams import derive_seed

try:
    VERSION = _pkg_version("urban-subdivide")
except PackageNotFoundError:
    VERSION = "0+unknown"

__all__ = [
    "VERSION",
    "run_pipeline",
    "load_field_csv",
    "load_labels_geojson",
    "spots_geojson",
    "write_spots",
    "write_income_csv",
    "write_poi_tables",
    "characterize_spots",
]

FIELD_HEADER = ("cell_id", "raw", "standardized")


def _nul(x: Any) -> Any:
    """JSON-safe scalar: NaN and infinities become null."""
    if x is None:
        return None
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def load_field_csv(path, metric_id: str = "custom") -> MetricField:
    """Read a per-cell field (``cell_id,raw,standardized``) back into memory."""
    rows = read_csv_strict(path, FIELD_HEADER)
    raw: dict[str, float] = {}
    std: dict[str, float] = {}
    for lineno, row in enumerate(rows, start=2):
        cid = row["cell_id"]
        try:
            raw[cid] = float(row["raw"])
            std[cid] = float(row["standardized"])
        except ValueError as exc:
            raise MissingPropertyError(f"{path}:{lineno}: {exc}") from exc
    return MetricField(metric_id, raw, std, len(raw))


def spots_geojson(
    grid: ingest.CellGrid,
    field: MetricField,
    local: spatial.LocalMoranResult,
    metric_id: str,
) -> dict:
    """Annotated grid: per-cell stats and label for one metric."""
    from shapely.geometry import mapping as geom_mapping

    features = []
    for cell in grid:
        cid = cell.cell_id
        stats = local.cells.get(cid)
        props = {
            "cell_id": cid,
            "metric": metric_id,
            "raw": _nul(field.raw.get(cid)),
            "standardized": _nul(field.standardized.get(cid)),
            "local_I": _nul(stats.local_I) if stats else None,
            "lag": _nul(stats.lag) if stats else None,
            "quadrant": stats.quadrant if stats else None,
            "pseudo_p": _nul(stats.pseudo_p) if stats else None,
            "label": stats.label if stats else None,
        }
        features.append(
            {"type": "Feature", "properties": props, "geometry": geom_mapping(cell.polygon)}
        )
    doc: dict[str, Any] = {"type": "FeatureCollection", "features": features}
    if grid.crs is not None:
        doc["crs"] = {"type": "name", "properties": {"name": grid.crs}}
    return doc


def write_spots(path, grid, field, local, metric_id) -> None:
    write_json(path, spots_geojson(grid, field, local, metric_id))


def load_labels_geojson(path) -> dict[str, str]:
    """Labels back out of a spots file; unanalyzed cells are skipped."""
    doc = read_json(path)
    labels: dict[str, str] = {}
    for feat in doc.get("features", []):
        props = feat.get("properties") or {}
        cid = props.get("cell_id")
        label = props.get("label")
        if isinstance(cid, str) and isinstance(label, str):
            labels[cid] = label
    if not labels:
        raise NoSpotsError(f"{path}: no labeled cells found")
    return labels


def write_income_csv(path, grid: ingest.CellGrid, income: geometry.IncomeField) -> None:
    rows = []
    for cid in grid.ids:
        rows.append(
            (cid, income.income.get(cid), income.covered_fraction.get(cid))
        )
    write_csv(path, ("cell_id", "income", "covered_fraction"), rows)


def write_poi_tables(out_dir: Path, grid, table: geometry.PoiTable, assoc, entropy) -> list[str]:
    written = []
    counts_path = out_dir / "poi_counts.csv"
    write_csv(
        counts_path,
        ("cell_id",) + tuple(table.categories),
        [(cid,) + tuple(table.counts[cid][c] for c in table.categories) for cid in grid.ids],
    )
    written.append(counts_path.name)
    if assoc is not None:
        delta_path = out_dir / "poi_delta.csv"
        write_csv(
            delta_path,
            ("cell_id", "category", "delta"),
            [
                (cid, cat, assoc.delta[cid][cat])
                for cid in grid.ids
                for cat in assoc.categories
            ],
        )
        written.append(delta_path.name)
    if entropy is not None:
        ent_path = out_dir / "entropy.csv"
        write_csv(
            ent_path,
            ("cell_id", "entropy", "n_pois"),
            [
                (cid, entropy.entropy.get(cid), entropy.n_pois.get(cid, 0))
                for cid in grid.ids
            ],
        )
        written.append(ent_path.name)
    return written


def _write_cdf(path, hot: Sequence[float], cold: Sequence[float]) -> None:
    rows = [("hot", v, f) for v, f in chz.ecdf_points(hot)]
    rows += [("cold", v, f) for v, f in chz.ecdf_points(cold)]
    write_csv(path, ("label", "value", "ecdf"), rows)


def _labeled_values(labels: Mapping[str, str], values: Mapping[str, float], label: str) -> list[float]:
    return [values[cid] for cid, lab in labels.items() if lab == label and cid in values]


def characterize_spots(
    *,
    out_dir: Path,
    grid: ingest.CellGrid,
    labels_by_metric: Mapping[str, Mapping[str, str]],
    income: geometry.IncomeField | None,
    poi_table: geometry.PoiTable | None,
    alpha_prior: float,
    ks_method: str,
) -> tuple[list[tuple], list[dict], list[str]]:
    """All hot-vs-cold comparisons; returns (rows, skipped, written files).

    Bonferroni families follow the reporting tables: the income and
    entropy comparisons are corrected by the number of metrics, the
    per-category POI comparisons by categories times metrics.
    """
    n_metrics = len(labels_by_metric)
    rows: list[tuple] = []
    skipped: list[dict] = []
    written: list[str] = []

    assoc = entropy = None
    if poi_table is not None:
        assoc = chz.poi_log_odds(poi_table, alpha_prior=alpha_prior)
        entropy = chz.poi_entropy(poi_table)
    poi_m = (len(assoc.categories) if assoc else 0) * n_metrics

    for metric_id, labels in labels_by_metric.items():
        if income is not None:
            try:
                res = chz.compare_income(labels, income, method=ks_method, bonferroni_m=n_metrics)
                rows.append(
                    (metric_id, "income", "", res.statistic, res.p_value,
                     res.p_bonferroni, res.n_hot, res.n_cold)
                )
                cdf = out_dir / f"cdf_income_{metric_id}.csv"
                _write_cdf(
                    cdf,
                    _labeled_values(labels, income.income, spatial.HOT),
                    _labeled_values(labels, income.income, spatial.COLD),
                )
                written.append(cdf.name)
            except (NoSpotsError, EmptySampleError) as exc:
                skipped.append({"metric": metric_id, "comparison": "income", "reason": str(exc)})
        if assoc is not None:
            try:
                by_cat = chz.compare_poi_association(
                    assoc, labels, method=ks_method, bonferroni_m=poi_m
                )
                for cat in assoc.categories:
                    res = by_cat[cat]
                    rows.append(
                        (metric_id, "poi", cat, res.statistic, res.p_value,
                         res.p_bonferroni, res.n_hot, res.n_cold)
                    )
            except (NoSpotsError, EmptySampleError) as exc:
                skipped.append({"metric": metric_id, "comparison": "poi", "reason": str(exc)})
        if entropy is not None:
            try:
                res = chz.compare_entropy(entropy, labels, method=ks_method, bonferroni_m=n_metrics)
                rows.append(
                    (metric_id, "entropy", "", res.statistic, res.p_value,
                     res.p_bonferroni, res.n_hot, res.n_cold)
                )
                cdf = out_dir / f"cdf_entropy_{metric_id}.csv"
                _write_cdf(
                    cdf,
                    _labeled_values(labels, entropy.entropy, spatial.HOT),
                    _labeled_values(labels, entropy.entropy, spatial.COLD),
                )
                written.append(cdf.name)
            except (NoSpotsError, EmptySampleError) as exc:
                skipped.append({"metric": metric_id, "comparison": "entropy", "reason": str(exc)})

    if rows:
        comp_path = out_dir / "comparisons.csv"
        write_csv(
            comp_path,
            ("metric", "comparison", "category", "ks", "p", "p_bonferroni", "n_hot", "n_cold"),
            rows,
        )
        written.append(comp_path.name)
    if poi_table is not None:
        written.extend(write_poi_tables(out_dir, grid, poi_table, assoc, entropy))
    return rows, skipped, written


class _Stage:
    """Context manager attributing failures to a named stage."""

    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and not isinstance(exc, PipelineError):
            raise PipelineError(self.name, exc) from exc
        return False


def run_pipeline(cfg: RunConfig) -> dict:
    """Full run: ingest, geometry, metrics, spatial statistics, comparisons.

    Returns the report dictionary (also written as report.json).
    """
    out_dir = Path(cfg.output_dir)
    if out_dir.exists() and any(out_dir.iterdir()) and not cfg.force:
        raise ConfigError(f"output directory {out_dir} is not empty; use force to replace it")
    staging = out_dir.parent / (out_dir.name + ".staging")
    if staging.exists():
        shutil.rmtree(staging)
    staging.mkdir(parents=True)
    try:
        report = _run_stages(cfg, staging)
        if out_dir.exists():
            shutil.rmtree(out_dir)
        staging.replace(out_dir)
        return report
    except BaseException:
        shutil.rmtree(staging, ignore_errors=True)
        raise


def _run_stages(cfg: RunConfig, out_dir: Path) -> dict:
    captured: list[str] = []

    with _Stage("ingest"), warnings.catch_warnings(record=True) as wlist:
        warnings.simplefilter("always")
        grid = ingest.load_grid(cfg.grid, overlap_tol=cfg.overlap_tol)
        visits = ingest.load_visits(cfg.visits, grid)
        neighborhoods = (
            ingest.load_neighborhoods(cfg.neighborhoods) if cfg.neighborhoods else None
        )
        pois = ingest.load_pois(cfg.pois) if cfg.pois else None
    captured.extend(str(w.message) for w in wlist)

    with _Stage("geometry"):
        adjacency = geometry.build_adjacency(grid, contiguity=cfg.contiguity, tol=cfg.snap_tol)
        income = (
            geometry.interpolate_income(
                grid, neighborhoods, min_covered_fraction=cfg.min_covered_fraction
            )
            if neighborhoods is not None
            else None
        )
        poi_table = geometry.assign_pois(grid, pois) if pois is not None else None

    with _Stage("metrics"), warnings.catch_warnings(record=True) as wlist:
        warnings.simplefilter("always")
        fields = {
            mid: metrics.compute_metric(mid, visits, grid, cfg.window) for mid in cfg.metrics
        }
    captured.extend(str(w.message) for w in wlist)

    with _Stage("spatial"):
        weights = spatial.build_weights(adjacency)
        global_results: dict[str, spatial.GlobalMoranResult] = {}
        local_results: dict[str, spatial.LocalMoranResult] = {}
        classifications: dict[str, spatial.SpotClassification] = {}
        for mid in cfg.metrics:
            fld = fields[mid]
            global_results[mid] = spatial.global_moran(
                fld,
                weights,
                permutations=cfg.permutations,
                seed=derive_seed(cfg.seed, mid, "global"),
                alternative=cfg.global_alternative,
            )
            local_results[mid] = spatial.local_moran(
                fld,
                weights,
                permutations=cfg.permutations,
                seed=derive_seed(cfg.seed, mid, "local"),
                alpha=cfg.alpha,
                variance=cfg.variance,
                alternative=cfg.local_alternative,
                threads=cfg.threads,
            )
            classifications[mid] = spatial.classify_spots(local_results[mid])

    with _Stage("characterize"):
        labels_by_metric = {mid: classifications[mid].labels for mid in cfg.metrics}
        comparison_rows, skipped, comp_files = characterize_spots(
            out_dir=out_dir,
            grid=grid,
            labels_by_metric=labels_by_metric,
            income=income,
            poi_table=poi_table,
            alpha_prior=cfg.alpha_prior,
            ks_method=cfg.ks_method,
        )

    with _Stage("write"):
        written: list[str] = list(comp_files)
        for mid in cfg.metrics:
            fpath = out_dir / f"metric_{mid}.csv"
            write_csv(
                fpath,
                FIELD_HEADER,
                [
                    (cid, fields[mid].raw[cid], fields[mid].standardized[cid])
                    for cid in grid.ids
                    if cid in fields[mid].raw
                ],
            )
            written.append(fpath.name)
            spath = out_dir / f"spots_{mid}.geojson"
            write_spots(spath, grid, fields[mid], local_results[mid], mid)
            written.append(spath.name)
        summary_path = out_dir / "summary.csv"
        write_csv(
            summary_path,
            ("metric", "global_I", "expected_I", "pseudo_p", "permutations", "n_hot", "n_cold"),
            [
                (
                    mid,
                    global_results[mid].I,
                    global_results[mid].expected_I,
                    global_results[mid].pseudo_p,
                    global_results[mid].permutations,
                    classifications[mid].counts[spatial.HOT],
                    classifications[mid].counts[spatial.COLD],
                )
                for mid in cfg.metrics
            ],
        )
        written.append(summary_path.name)
        if income is not None:
            ipath = out_dir / "income.csv"
            write_income_csv(ipath, grid, income)
            written.append(ipath.name)

        report = {
            "tool": {"name": "urban-subdivide", "version": VERSION},
            "config": cfg.echo(),
            "inputs": {
                "grid": {"path": str(cfg.grid), "sha256": sha256_file(cfg.grid), "cells": len(grid)},
                "visits": {"path": str(cfg.visits), "sha256": sha256_file(cfg.visits), "records": len(visits)},
                **(
                    {"neighborhoods": {"path": str(cfg.neighborhoods), "sha256": sha256_file(cfg.neighborhoods)}}
                    if cfg.neighborhoods
                    else {}
                ),
                **({"pois": {"path": str(cfg.pois), "sha256": sha256_file(cfg.pois)}} if cfg.pois else {}),
            },
            "adjacency": {
                "contiguity": cfg.contiguity,
                "islands": list(adjacency.islands()),
            },
            "metrics": {
                mid: {
                    "excluded_cells": list(fields[mid].excluded),
                    "n_cells": fields[mid].n_cells,
                    "global": {
                        "I": _nul(global_results[mid].I),
                        "expected_I": _nul(global_results[mid].expected_I),
                        "pseudo_p": _nul(global_results[mid].pseudo_p),
                        "permutations": global_results[mid].permutations,
                        "tail": global_results[mid].tail,
                        "n": global_results[mid].n,
                    },
                    "spots": dict(classifications[mid].counts),
                }
                for mid in cfg.metrics
            },
            **(
                {
                    "income": {
                        "no_coverage": list(income.no_coverage),
                        "covered_cells": len(income.income),
                    }
                }
                if income is not None
                else {}
            ),
            **(
                {
                    "pois": {
                        "total": poi_table.grand_total(),
                        "unassigned": poi_table.unassigned,
                        "empty_cells": [
                            cid for cid in grid.ids if poi_table.cell_total(cid) == 0
                        ],
                    }
                }
                if poi_table is not None
                else {}
            ),
            "comparisons": [
                {
                    "metric": r[0],
                    "comparison": r[1],
                    "category": r[2],
                    "ks": r[3],
                    "p": r[4],
                    "p_bonferroni": r[5],
                    "n_hot": r[6],
                    "n_cold": r[7],
                }
                for r in comparison_rows
            ],
            "skipped_comparisons": skipped,
            "warnings": captured,
            "outputs": {},
        }
        report["outputs"] = {
            name: sha256_file(out_dir / name) for name in sorted(written)
        }
        write_json(out_dir / "report.json", report)
    return report
