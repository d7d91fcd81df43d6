"""Slow reference implementations the fast code is checked against.

Everything here favors transparency over speed: plain dict loops,
exact rational arithmetic, brute-force enumeration.  None of it shares
code with the package internals.
"""

from __future__ import annotations

import math
from fractions import Fraction
from itertools import combinations

import mpmath


def moran_global_brute(values: dict[str, float], rows: dict[str, list[tuple[str, float]]]) -> float:
    """Double loop over weight entries; assumes every cell has a neighbor."""
    ids = sorted(values)
    n = len(ids)
    mean = sum(values[i] for i in ids) / n
    z = {i: values[i] - mean for i in ids}
    s0 = 0.0
    num = 0.0
    for i in ids:
        for j, w in rows[i]:
            s0 += w
            num += w * z[i] * z[j]
    den = sum(z[i] ** 2 for i in ids)
    return (n / s0) * num / den


def moran_local_brute(values: dict[str, float], rows: dict[str, list[tuple[str, float]]]) -> dict[str, float]:
    """Per-cell statistic with the pooled variance denominator."""
    ids = sorted(values)
    n = len(ids)
    mean = sum(values[i] for i in ids) / n
    z = {i: values[i] - mean for i in ids}
    m2 = sum(z[i] ** 2 for i in ids) / n
    out = {}
    for i in ids:
        lag = sum(w * z[j] for j, w in rows[i])
        out[i] = z[i] * lag / m2
    return out


def ks_statistic_fraction(a: list[float], b: list[float]) -> Fraction:
    """Sup distance between the two empirical CDFs, exactly."""
    n, m = len(a), len(b)
    sa, sb = sorted(a), sorted(b)
    best = Fraction(0)
    for t in sorted(set(a) | set(b)):
        fa = Fraction(sum(1 for v in sa if v <= t), n)
        fb = Fraction(sum(1 for v in sb if v <= t), m)
        best = max(best, abs(fa - fb))
    return best


def ks_exact_p_enumerate(a: list[float], b: list[float]) -> Fraction:
    """P(D >= observed) over all assignments of ranks to the first sample.

    Valid only without ties across the pooled sample.  Exponential in
    the sample sizes; keep them tiny.
    """
    n, m = len(a), len(b)
    pooled = sorted(a + b)
    assert len(set(pooled)) == n + m, "tie-free samples required"
    d_obs = ks_statistic_fraction(a, b)
    hits = 0
    total = 0
    for pick in combinations(range(n + m), n):
        pick_set = set(pick)
        xs = [pooled[i] for i in pick]
        ys = [pooled[i] for i in range(n + m) if i not in pick_set]
        total += 1
        if ks_statistic_fraction(xs, ys) >= d_obs:
            hits += 1
    return Fraction(hits, total)


def kolmogorov_sf_mp(t: float, terms: int = 200) -> float:
    """Survival function of the Kolmogorov distribution at high precision."""
    if t <= 0:
        return 1.0
    with mpmath.workdps(60):
        x = mpmath.mpf(t)
        s = mpmath.mpf(0)
        for k in range(1, terms + 1):
            s += (-1) ** (k - 1) * mpmath.e ** (-2 * k * k * x * x)
        return float(2 * s)


def entropy_nats(counts: dict[str, int]) -> float:
    total = sum(counts.values())
    h = 0.0
    for c in counts.values():
        if c > 0:
            p = c / total
            h -= p * math.log(p)
    return h


def log_odds_brute(
    counts: dict[str, dict[str, int]], alpha: float
) -> dict[str, dict[str, float]]:
    """Shrunk log-odds of each category in each cell against the corpus."""
    cats = sorted({c for row in counts.values() for c in row})
    k = len(cats)
    a0 = k * alpha
    col = {c: sum(row.get(c, 0) for row in counts.values()) for c in cats}
    grand = sum(col.values())
    out = {}
    for cid, row in counts.items():
        ni = sum(row.get(c, 0) for c in cats)
        out[cid] = {}
        for c in cats:
            y = row.get(c, 0)
            own = math.log((y + alpha) / (ni + a0 - y - alpha))
            ref = math.log((col[c] + alpha) / (grand + a0 - col[c] - alpha))
            out[cid][c] = own - ref
    return out
