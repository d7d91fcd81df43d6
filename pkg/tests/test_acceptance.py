"""Release acceptance checklist.

Eleven criteria, one test each, ordered.  Every test prints a one-line
PASS/FAIL verdict (visible with ``pytest -s``) before asserting, so a
run of this module reads as a checklist.  Fixtures are frozen by seed;
thresholds and runtime caps are part of the criteria and must not be
loosened.
"""

import math
import time

import numpy as np

from oracles import (
    ks_statistic_fraction,
    kolmogorov_sf_mp,
    moran_global_brute,
)
from urban_subdivide.characterize import (
    ks_two_sample,
    poi_entropy,
    poi_log_odds,
)
from urban_subdivide.config import load_config
from urban_subdivide.geometry import PoiTable, build_adjacency, interpolate_income
from urban_subdivide.ingest import CATEGORIES, Cell, CellGrid, Neighborhood
from urban_subdivide.metrics import MetricField
from urban_subdivide.pipeline import run_pipeline
from urban_subdivide.spatial import HOT, build_weights, global_moran, local_moran
from urban_subdivide.synth import BlockSpec, SynthSpec, add_income, add_pois, add_visits, generate, write_fixture

from shapely.geometry import box


def check(num, title, ok, detail):
    verdict = "PASS" if ok else "FAIL"
    print(f"{verdict}  [{num:02d}] {title}: {detail}")
    assert ok, f"[{num:02d}] {title}: {detail}"


def unit_weights(rows, cols, contiguity):
    grid = generate(SynthSpec(rows, cols, "checkerboard")).grid
    return build_weights(build_adjacency(grid, contiguity=contiguity))


def test_c01_checkerboard_closed_form():
    fx = generate(SynthSpec(8, 8, "checkerboard", seed=0))
    t0 = time.perf_counter()
    weights = build_weights(build_adjacency(fx.grid, contiguity="rook"))
    res = global_moran(fx.field, weights)
    elapsed = time.perf_counter() - t0
    err = abs(res.I - (-1.0))
    check(
        1,
        "checkerboard closed form",
        err <= 1e-9 and elapsed < 1.0,
        f"I={res.I!r} |I-(-1)|={err:.2e} (tol 1e-9), {elapsed:.3f}s (cap 1s)",
    )


def test_c02_global_statistic_matches_brute_force():
    rng = np.random.default_rng(42)
    worst = 0.0
    for k in range(50):
        rows = int(rng.integers(3, 21))
        cols = int(rng.integers(3, 21))
        fx = generate(SynthSpec(rows, cols, "random", noise_sd=1.0, seed=1000 + k))
        contiguity = "queen" if k % 2 == 0 else "rook"
        weights = build_weights(build_adjacency(fx.grid, contiguity=contiguity))
        fast = global_moran(fx.field, weights, permutations=1).I
        slow = moran_global_brute(fx.field.raw, weights.rows)
        worst = max(worst, abs(fast - slow))
    check(
        2,
        "brute-force oracle equivalence",
        worst <= 1e-12,
        f"max |fast-slow| = {worst:.2e} over 50 fixtures up to 20x20 (tol 1e-12)",
    )


def test_c03_null_expectation_of_global_statistic():
    weights = unit_weights(10, 10, "queen")
    ids = sorted(weights.rows)
    rng = np.random.default_rng(7)
    base = rng.standard_normal(len(ids))
    stats = []
    for _ in range(200):
        shuffled = rng.permutation(base)
        field = MetricField.from_raw("custom", dict(zip(ids, map(float, shuffled))))
        stats.append(global_moran(field, weights, permutations=1).I)
    mean = float(np.mean(stats))
    se = float(np.std(stats, ddof=1)) / math.sqrt(len(stats))
    expected = -1.0 / (len(ids) - 1)
    dev = abs(mean - expected)
    check(
        3,
        "null expectation -1/(N-1)",
        dev <= 3.0 * se,
        f"mean I={mean:.5f}, expected {expected:.5f}, |dev|={dev:.5f} <= 3*SE={3 * se:.5f}",
    )


def test_c04_local_null_calibration():
    weights = unit_weights(10, 10, "queen")
    t0 = time.perf_counter()
    significant = 0
    total = 0
    for seed in range(50):
        fx = generate(SynthSpec(10, 10, "random", noise_sd=1.0, seed=2000 + seed))
        res = local_moran(fx.field, weights, permutations=999, seed=seed)
        for cell in res.cells.values():
            if cell.pseudo_p is None:
                continue
            total += 1
            if cell.pseudo_p <= res.alpha:
                significant += 1
    elapsed = time.perf_counter() - t0
    frac = significant / total
    check(
        4,
        "local null calibration",
        0.02 <= frac <= 0.09 and elapsed < 30.0,
        f"significant fraction {frac:.4f} in [0.02, 0.09] over {total} cells, {elapsed:.1f}s (cap 30s)",
    )


def test_c05_planted_cluster_recovery():
    weights = unit_weights(10, 10, "queen")
    block = BlockSpec(row=3, col=3, height=4, width=4, contrast=3.0)
    recalls = []
    far_hot = 0
    for seed in range(20):
        fx = generate(SynthSpec(10, 10, "planted_block", block=block, noise_sd=1.0, seed=3000 + seed))
        labels = local_moran(fx.field, weights, permutations=999, seed=seed).labels()
        interior = fx.truth["block_interior"]
        recalls.append(sum(labels[c] == HOT for c in interior) / len(interior))
        far_hot += sum(labels[c] == HOT for c in fx.truth["far_cells"])
    recall = float(np.mean(recalls))
    check(
        5,
        "planted cluster recovery",
        recall >= 0.9 and far_hot == 0,
        f"interior recall {recall:.3f} >= 0.9, hot labels >=2 rings away: {far_hot} (must be 0)",
    )


def test_c06_ks_statistic_and_asymptotic_p():
    rng = np.random.default_rng(5)
    stat_exact = True
    worst_p = 0.0
    checked_p = 0
    for k in range(100):
        n = int(rng.integers(2, 201))
        m = int(rng.integers(2, 201))
        shift = float(rng.normal(0.0, 0.5))
        a = rng.standard_normal(n)
        b = rng.standard_normal(m) + shift
        res = ks_two_sample(a, b)
        oracle_d = ks_statistic_fraction([float(x) for x in a], [float(x) for x in b])
        if res.statistic != float(oracle_d):
            stat_exact = False
        effective = n * m / (n + m)
        if effective >= 35:
            checked_p += 1
            ref = kolmogorov_sf_mp(math.sqrt(effective) * res.statistic)
            worst_p = max(worst_p, abs(res.p_value - ref))
    check(
        6,
        "two-sample KS oracle",
        stat_exact and worst_p <= 5e-3 and checked_p > 0,
        f"statistic exact on 100 pairs: {stat_exact}; max |p-ref|={worst_p:.2e} "
        f"(tol 5e-3) on {checked_p} pairs with effective n >= 35",
    )


def test_c07_log_odds_hand_case():
    cats = ("food", "health")
    table = PoiTable(cats, {"A": {"food": 3, "health": 1}, "B": {"food": 1, "health": 3}})
    delta = poi_log_odds(table, alpha_prior=0.5).delta
    err = abs(delta["A"]["food"] - math.log(7.0 / 3.0))
    mirror = max(abs(delta["B"][w] + delta["A"][w]) for w in cats)
    check(
        7,
        "log-odds hand case",
        err <= 1e-12 and mirror <= 1e-12,
        f"|delta(A,food)-log(7/3)|={err:.2e}, max |delta(B,w)+delta(A,w)|={mirror:.2e} (tol 1e-12)",
    )


def test_c08_entropy_reference_cases_and_bounds():
    def one_cell_table(row):
        full = dict.fromkeys(CATEGORIES, 0)
        full.update(row)
        return PoiTable(CATEGORIES, {"c": full})

    h_single = poi_entropy(one_cell_table({"food": 5})).entropy["c"]
    h_two = poi_entropy(one_cell_table({"food": 3, "health": 3})).entropy["c"]
    h_all = poi_entropy(one_cell_table(dict.fromkeys(CATEGORIES, 4))).entropy["c"]
    ref_err = max(
        abs(h_single - 0.0),
        abs(h_two - math.log(2.0)),
        abs(h_all - math.log(8.0)),
    )

    rng = np.random.default_rng(9)
    in_bounds = True
    for _ in range(300):
        counts = {cat: int(rng.integers(0, 10)) for cat in CATEGORIES}
        if sum(counts.values()) == 0:
            continue
        h = poi_entropy(one_cell_table(counts)).entropy["c"]
        if not (0.0 <= h <= math.log(8.0) + 1e-12):
            in_bounds = False
    check(
        8,
        "entropy references and bounds",
        ref_err <= 1e-12 and in_bounds,
        f"max reference error {ref_err:.2e} (tol 1e-12); 0 <= H <= ln 8 on random counts: {in_bounds}",
    )


def test_c09_areal_interpolation():
    grid = CellGrid([Cell("c0", box(0.0, 0.0, 2.0, 2.0))], crs="LOCAL:test")
    halves = [
        Neighborhood("w", 80.0, box(0.0, 0.0, 1.0, 2.0)),
        Neighborhood("e", 120.0, box(1.0, 0.0, 2.0, 2.0)),
    ]
    split_err = abs(interpolate_income(grid, halves).income["c0"] - 100.0)

    subdivided = [
        Neighborhood("w1", 80.0, box(0.0, 0.0, 1.0, 1.0)),
        Neighborhood("w2", 80.0, box(0.0, 1.0, 1.0, 2.0)),
        Neighborhood("e", 120.0, box(1.0, 0.0, 2.0, 2.0)),
    ]
    a = interpolate_income(grid, halves).income["c0"]
    b = interpolate_income(grid, subdivided).income["c0"]
    rel = abs(a - b) / abs(a)
    check(
        9,
        "areal income interpolation",
        split_err <= 1e-9 and rel <= 1e-9,
        f"50/50 case |v-100|={split_err:.2e} (tol 1e-9); subdivision rel diff {rel:.2e} (tol 1e-9)",
    )


def test_c10_thread_count_invariance(tmp_path):
    fx = generate(SynthSpec(8, 8, "half_split", noise_sd=0.25, seed=3))
    add_visits(fx)
    add_income(fx)
    add_pois(fx, base_total=60)
    paths = write_fixture(fx, tmp_path / "fix")
    out = tmp_path / "run"
    snapshots = []
    for threads in (1, 4):
        run_pipeline(
            load_config(
                None,
                grid=paths["grid"],
                visits=paths["visits"],
                neighborhoods=paths["neighborhoods"],
                pois=paths["pois"],
                output_dir=out,
                metrics="G",
                permutations=199,
                seed=1,
                threads=threads,
                force=True,
            )
        )
        snapshots.append({p.name: p.read_bytes() for p in out.iterdir()})
    same = snapshots[0] == snapshots[1]
    check(
        10,
        "byte-identical across thread counts",
        same,
        f"{len(snapshots[0])} output files compared byte-for-byte (threads 1 vs 4): identical={same}",
    )


def test_c11_planted_report_significance(tmp_path):
    fx = generate(SynthSpec(12, 12, "half_split", noise_sd=0.25, seed=11))
    add_visits(fx)
    add_income(fx, boost_sigmas=2.0)
    # moderate POI density: doubling one category inflates hot-cell totals,
    # and at high densities that composition shift becomes detectable in the
    # other categories' log-odds
    add_pois(fx, boost_category="nightlife", boost_factor=2, base_total=60)
    paths = write_fixture(fx, tmp_path / "fix")
    report = run_pipeline(
        load_config(
            None,
            grid=paths["grid"],
            visits=paths["visits"],
            neighborhoods=paths["neighborhoods"],
            pois=paths["pois"],
            output_dir=tmp_path / "run",
            metrics="G",
            seed=1,
        )
    )
    rows = report["comparisons"]
    by_kind = {}
    for r in rows:
        by_kind[(r["comparison"], r["category"])] = r

    income = by_kind[("income", "")]
    entropy = by_kind[("entropy", "")]
    sides_ok = income["n_hot"] >= 20 and income["n_cold"] >= 20
    income_sig = income["p_bonferroni"] <= 0.05
    entropy_ns = entropy["p_bonferroni"] > 0.05
    poi_sig = {cat: by_kind[("poi", cat)]["p_bonferroni"] <= 0.05 for cat in CATEGORIES}
    exactly_boosted = poi_sig["nightlife"] and not any(
        poi_sig[c] for c in CATEGORIES if c != "nightlife"
    )
    check(
        11,
        "planted report significance",
        sides_ok and income_sig and entropy_ns and exactly_boosted,
        f"sides n_hot={income['n_hot']}/n_cold={income['n_cold']} (>=20); "
        f"income p_bonf={income['p_bonferroni']:.2e} <= 0.05; "
        f"nightlife p_bonf={by_kind[('poi', 'nightlife')]['p_bonferroni']:.2e} <= 0.05; "
        f"other categories significant: {[c for c in CATEGORIES if c != 'nightlife' and poi_sig[c]]}; "
        f"entropy p_bonf={entropy['p_bonferroni']:.3f} > 0.05",
    )
