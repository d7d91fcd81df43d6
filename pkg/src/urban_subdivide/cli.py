"""Command line interface.

Each subcommand runs one pipeline stage from files to files with the
same schemas the full run uses, so stages can be chained or re-run in
isolation.  Exit codes: 0 success, 2 invalid input or configuration,
3 statistical degeneracy, 4 I/O failure.
"""

from __future__ import annotations

import functools
import sys
from pathlib import Path

import click

from . import geometry, ingest, metrics, pipeline, spatial, synth
from .config import OUTPUT_ENV_VAR, load_config
from .errors import InvalidSpecError, PipelineError, UrbanSubdivideError
from .fileio import read_json, write_csv
from .metrics import TimeWindow
from .streams import derive_seed

__all__ = ["main"]


def _echo_err(message: str) -> None:
    click.echo(message, err=True)


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except PipelineError as exc:
            _echo_err(f"error: {exc}")
            sys.exit(exc.exit_code)
        except UrbanSubdivideError as exc:
            _echo_err(f"error [{exc.code}]: {exc}")
            sys.exit(exc.exit_code)
        except OSError as exc:
            _echo_err(f"i/o error: {exc}")
            sys.exit(4)

    return wrapper


@click.group()
@click.version_option(version=pipeline.VERSION, prog_name="urban-subdivide")
def main() -> None:
    """Spatial subdivision analysis of urban mobility fields."""


def _window_options(fn):
    fn = click.option("--window-start", type=int, default=8, show_default=True,
                      help="Window start hour (4-hour bin edge).")(fn)
    fn = click.option("--window-end", type=int, default=24, show_default=True,
                      help="Window end hour, exclusive (4-hour bin edge).")(fn)
    return fn


def _contiguity_options(fn):
    fn = click.option("--contiguity", type=click.Choice(["queen", "rook"]), default="queen",
                      show_default=True)(fn)
    fn = click.option("--snap-tol", type=float, default=geometry.SNAP_TOL, show_default=True,
                      help="Boundary snapping tolerance in CRS units.")(fn)
    return fn


@main.command()
@click.option("--grid", type=click.Path(path_type=Path), default=None)
@click.option("--visits", type=click.Path(path_type=Path), default=None)
@click.option("--neighborhoods", type=click.Path(path_type=Path), default=None)
@click.option("--pois", type=click.Path(path_type=Path), default=None)
@handle_errors
def validate(grid, visits, neighborhoods, pois) -> None:
    """Check inputs and report the first problem in each file."""
    if not any([grid, visits, neighborhoods, pois]):
        raise click.UsageError("nothing to validate; pass at least --grid")
    failures = 0
    loaded_grid = None
    if grid is not None:
        try:
            loaded_grid = ingest.load_grid(grid)
            click.echo(f"{grid}: ok ({len(loaded_grid)} cells)")
        except UrbanSubdivideError as exc:
            click.echo(f"{grid}: {exc.code}: {exc}")
            failures += 1
    if visits is not None:
        if loaded_grid is None:
            click.echo(f"{visits}: skipped (needs a valid --grid)")
            failures += 1
        else:
            try:
                records = ingest.load_visits(visits, loaded_grid)
                click.echo(f"{visits}: ok ({len(records)} records)")
            except UrbanSubdivideError as exc:
                click.echo(f"{visits}: {exc.code}: {exc}")
                failures += 1
    if neighborhoods is not None:
        try:
            nbs = ingest.load_neighborhoods(neighborhoods)
            click.echo(f"{neighborhoods}: ok ({len(nbs)} neighborhoods)")
        except UrbanSubdivideError as exc:
            click.echo(f"{neighborhoods}: {exc.code}: {exc}")
            failures += 1
    if pois is not None:
        try:
            points = ingest.load_pois(pois)
            click.echo(f"{pois}: ok ({len(points)} points)")
        except UrbanSubdivideError as exc:
            click.echo(f"{pois}: {exc.code}: {exc}")
            failures += 1
    if failures:
        sys.exit(2)


@main.command(name="metrics")
@click.option("--grid", type=click.Path(path_type=Path), required=True)
@click.option("--visits", type=click.Path(path_type=Path), required=True)
@click.option("--metrics", "metric_ids", default="G,E,T", show_default=True,
              help="Comma-separated metric ids.")
@_window_options
@click.option("--out", type=click.Path(path_type=Path), required=True, envvar=OUTPUT_ENV_VAR)
@handle_errors
def metrics_cmd(grid, visits, metric_ids, window_start, window_end, out) -> None:
    """Compute standardized ratio metrics per cell."""
    g = ingest.load_grid(grid)
    v = ingest.load_visits(visits, g)
    window = TimeWindow(window_start, window_end)
    out.mkdir(parents=True, exist_ok=True)
    for mid in [m.strip() for m in metric_ids.split(",") if m.strip()]:
        fld = metrics.compute_metric(mid, v, g, window)
        path = out / f"metric_{mid}.csv"
        write_csv(
            path,
            pipeline.FIELD_HEADER,
            [(cid, fld.raw[cid], fld.standardized[cid]) for cid in g.ids if cid in fld.raw],
        )
        click.echo(f"{path} cells={fld.n_cells} excluded={len(fld.excluded)}")


@main.command(name="moran-global")
@click.option("--grid", type=click.Path(path_type=Path), required=True)
@click.option("--field", "field_csv", type=click.Path(path_type=Path), required=True,
              help="Per-cell field CSV (cell_id,raw,standardized).")
@_contiguity_options
@click.option("--permutations", type=int, default=999, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--alternative", type=click.Choice(["directional", "greater", "less", "two-sided"]),
              default="directional", show_default=True)
@click.option("--out", type=click.Path(path_type=Path), default=None,
              help="Optional CSV to append the summary row to.")
@handle_errors
def moran_global(grid, field_csv, contiguity, snap_tol, permutations, seed, alternative, out) -> None:
    """Global spatial autocorrelation of a per-cell field."""
    g = ingest.load_grid(grid)
    fld = pipeline.load_field_csv(field_csv)
    weights = spatial.build_weights(geometry.build_adjacency(g, contiguity=contiguity, tol=snap_tol))
    res = spatial.global_moran(
        fld, weights, permutations=permutations, seed=seed, alternative=alternative
    )
    click.echo(
        f"I={res.I!r} expected_I={res.expected_I!r} pseudo_p={res.pseudo_p!r} "
        f"permutations={res.permutations} tail={res.tail} n={res.n}"
    )
    if out is not None:
        write_csv(
            out,
            ("metric", "global_I", "expected_I", "pseudo_p", "permutations", "n_hot", "n_cold"),
            [(fld.metric_id, res.I, res.expected_I, res.pseudo_p, res.permutations, "", "")],
        )


@main.command(name="moran-local")
@click.option("--grid", type=click.Path(path_type=Path), required=True)
@click.option("--field", "field_csv", type=click.Path(path_type=Path), required=True)
@click.option("--metric-id", default="custom", show_default=True)
@_contiguity_options
@click.option("--permutations", type=int, default=999, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--alpha", type=float, default=0.05, show_default=True)
@click.option("--variance", type=click.Choice(["global", "neighbors"]), default="global",
              show_default=True, help="Denominator of the per-cell statistic.")
@click.option("--alternative", type=click.Choice(["two-sided", "directional", "greater", "less"]),
              default="two-sided", show_default=True)
@click.option("--threads", type=int, default=1, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), required=True, envvar=OUTPUT_ENV_VAR)
@handle_errors
def moran_local(grid, field_csv, metric_id, contiguity, snap_tol, permutations, seed,
                alpha, variance, alternative, threads, out) -> None:
    """Per-cell spatial association, labels and annotated GeoJSON."""
    g = ingest.load_grid(grid)
    fld = pipeline.load_field_csv(field_csv, metric_id)
    weights = spatial.build_weights(geometry.build_adjacency(g, contiguity=contiguity, tol=snap_tol))
    res = spatial.local_moran(
        fld, weights, permutations=permutations, seed=seed, alpha=alpha,
        variance=variance, alternative=alternative, threads=threads,
    )
    cls = spatial.classify_spots(res)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"spots_{metric_id}.geojson"
    pipeline.write_spots(path, g, fld, res, metric_id)
    counts = " ".join(f"{k}={cls.counts[k]}" for k in spatial.SPOT_LABELS)
    click.echo(f"{path} {counts}")


@main.command(name="characterize")
@click.option("--grid", type=click.Path(path_type=Path), required=True)
@click.option("--spots", "spots_files", type=click.Path(path_type=Path), multiple=True,
              required=True, help="Spots GeoJSON file(s) from moran-local.")
@click.option("--neighborhoods", type=click.Path(path_type=Path), default=None)
@click.option("--pois", type=click.Path(path_type=Path), default=None)
@click.option("--alpha-prior", type=float, default=0.5, show_default=True)
@click.option("--min-covered-fraction", type=float, default=0.05, show_default=True)
@click.option("--ks-method", type=click.Choice(["asymptotic", "exact", "auto"]),
              default="asymptotic", show_default=True)
@click.option("--out", type=click.Path(path_type=Path), required=True, envvar=OUTPUT_ENV_VAR)
@handle_errors
def characterize_cmd(grid, spots_files, neighborhoods, pois, alpha_prior,
                     min_covered_fraction, ks_method, out) -> None:
    """Hot-vs-cold comparisons of income, POI composition and diversity."""
    if neighborhoods is None and pois is None:
        raise click.UsageError("pass --neighborhoods and/or --pois; nothing to compare otherwise")
    g = ingest.load_grid(grid)
    labels_by_metric = {}
    for path in spots_files:
        doc = read_json(path)
        feats = doc.get("features") or []
        mid = next(
            (f["properties"]["metric"] for f in feats if (f.get("properties") or {}).get("metric")),
            Path(path).stem,
        )
        labels_by_metric[mid] = pipeline.load_labels_geojson(path)
    income = None
    if neighborhoods is not None:
        nbs = ingest.load_neighborhoods(neighborhoods)
        income = geometry.interpolate_income(g, nbs, min_covered_fraction=min_covered_fraction)
    poi_table = None
    if pois is not None:
        poi_table = geometry.assign_pois(g, ingest.load_pois(pois))
    out.mkdir(parents=True, exist_ok=True)
    rows, skipped, written = pipeline.characterize_spots(
        out_dir=out, grid=g, labels_by_metric=labels_by_metric, income=income,
        poi_table=poi_table, alpha_prior=alpha_prior, ks_method=ks_method,
    )
    if income is not None:
        pipeline.write_income_csv(out / "income.csv", g, income)
        written.append("income.csv")
    click.echo(f"{len(rows)} comparison(s), {len(skipped)} skipped -> {out}")
    for item in skipped:
        _echo_err(f"skipped {item['metric']}/{item['comparison']}: {item['reason']}")


def _parse_block(text: str | None) -> synth.BlockSpec | None:
    if text is None:
        return None
    parts = text.split(",")
    if len(parts) != 5:
        raise InvalidSpecError("--block expects 'row,col,height,width,contrast'")
    try:
        return synth.BlockSpec(
            int(parts[0]), int(parts[1]), int(parts[2]), int(parts[3]), float(parts[4])
        )
    except ValueError as exc:
        raise InvalidSpecError(f"--block: {exc}") from exc


@main.command(name="synth")
@click.option("--pattern", type=click.Choice(list(synth.PATTERNS)), required=True)
@click.option("--rows", type=int, default=10, show_default=True)
@click.option("--cols", type=int, default=10, show_default=True)
@click.option("--noise-sd", type=float, default=0.0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--block", default=None, help="row,col,height,width,contrast")
@click.option("--with-visits", is_flag=True, help="Also write visit counts encoding the field.")
@click.option("--with-income", is_flag=True, help="Also write income polygons (high cells boosted).")
@click.option("--with-pois", is_flag=True, help="Also write POI points (high cells boosted).")
@click.option("--boost-category", default="nightlife", show_default=True)
@click.option("--out", type=click.Path(path_type=Path), required=True, envvar=OUTPUT_ENV_VAR)
@handle_errors
def synth_cmd(pattern, rows, cols, noise_sd, seed, block, with_visits, with_income,
              with_pois, boost_category, out) -> None:
    """Write a synthetic fixture with known ground truth."""
    spec = synth.SynthSpec(
        rows=rows, cols=cols, pattern=pattern, block=_parse_block(block),
        noise_sd=noise_sd, seed=seed,
    )
    fixture = synth.generate(spec)
    if with_visits:
        synth.add_visits(fixture)
    if with_income:
        synth.add_income(fixture)
    if with_pois:
        synth.add_pois(fixture, boost_category=boost_category)
    paths = synth.write_fixture(fixture, out)
    for name in sorted(paths):
        click.echo(f"{name}: {paths[name]}")


@main.command(name="report")
@click.option("--config", "config_path", type=click.Path(path_type=Path), default=None,
              help="TOML run configuration; flags override it.")
@click.option("--grid", type=click.Path(path_type=Path), default=None)
@click.option("--visits", type=click.Path(path_type=Path), default=None)
@click.option("--neighborhoods", type=click.Path(path_type=Path), default=None)
@click.option("--pois", type=click.Path(path_type=Path), default=None)
@click.option("--metrics", "metric_ids", default=None, help="Comma-separated metric ids.")
@click.option("--permutations", type=int, default=None)
@click.option("--alpha", type=float, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--contiguity", type=click.Choice(["queen", "rook"]), default=None)
@click.option("--variance", type=click.Choice(["global", "neighbors"]), default=None)
@click.option("--ks-method", type=click.Choice(["asymptotic", "exact", "auto"]), default=None)
@click.option("--threads", type=int, default=None)
@click.option("--force", is_flag=True, default=False, help="Replace an existing output directory.")
@click.option("--out", "output_dir", type=click.Path(path_type=Path), default=None,
              help=f"Output directory (also ${OUTPUT_ENV_VAR}).")
@handle_errors
def report_cmd(config_path, grid, visits, neighborhoods, pois, metric_ids, permutations,
               alpha, seed, contiguity, variance, ks_method, threads, force, output_dir) -> None:
    """Run the full pipeline and write all tables, maps and the report."""
    cfg = load_config(
        config_path,
        grid=grid,
        visits=visits,
        neighborhoods=neighborhoods,
        pois=pois,
        metrics=metric_ids,
        permutations=permutations,
        alpha=alpha,
        seed=seed,
        contiguity=contiguity,
        variance=variance,
        ks_method=ks_method,
        threads=threads,
        force=force or None,
        output_dir=output_dir,
    )
    report = pipeline.run_pipeline(cfg)
    for mid, body in report["metrics"].items():
        g = body["global"]
        spots = body["spots"]
        click.echo(
            f"{mid}: I={g['I']!r} pseudo_p={g['pseudo_p']!r} "
            f"hot={spots['hot']} cold={spots['cold']}"
        )
    click.echo(f"report: {Path(cfg.output_dir) / 'report.json'}")


if __name__ == "__main__":
    main()
