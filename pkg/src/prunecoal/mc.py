"""Seeded, replicate-parallel Monte Carlo experiments and hypothesis tests.

Replicates are split into fixed-size blocks; block i draws from the child
stream (seed, lane, i) and partial results are reduced in block order, so a
summary is a pure function of (seed, experiment) no matter how many workers
ran it.  All acceptance-style statistical checks run at pinned seeds: they
are deterministic regression tests.
"""

from __future__ import annotations

import multiprocessing
from collections import Counter
from dataclasses import dataclass, field

from scipy.stats import chi2

from .coalescent import EventSizeSampler, beta_block_count_run, beta_chain_stats
from .oracle import DistTable, tv_distance, VerifyRow
from .pruning import prune_chain_stats
from .sampler import (
    OVERFLOW,
    sample_limit_B,
    sample_many_gw_with_n_leaves,
    spawn_rng,
)
from .specfun import b_pmf_table, z_moment

BLOCK_SIZE = 2500

_LANE_PRUNE = 0
_LANE_BETA = 1
_LANE_MISC = 2

EXPERIMENTS = (
    "first-event-size",
    "z-scaled-moments",
    "b-histogram",
    "b-limit-histogram",
    "r-power-B",
    "largest-block-fraction",
    "two-sample-traces",
)


@dataclass(frozen=True)
class McSummary:
    replicates: int
    estimates: dict
    variances: dict
    conf99: dict
    seed: int
    workers: int

    @staticmethod
    def from_moments(name_to_sums, reps, seed, workers) -> "McSummary":
        est, var, conf = {}, {}, {}
        for name, (s1, s2, count) in name_to_sums.items():
            mean = s1 / count
            v = max(s2 / count - mean * mean, 0.0)
            est[name] = mean
            var[name] = v
            conf[name] = 2.576 * (v / count) ** 0.5
        return McSummary(reps, est, var, conf, seed, workers)


def _blocks(reps: int):
    out = []
    i = 0
    left = reps
    while left > 0:
        take = min(BLOCK_SIZE, left)
        out.append((i, take))
        left -= take
        i += 1
    return out


def _run_blocks(fn, common, reps, seed, workers):
    """Map fn over blocks; results come back in block order regardless of
    the worker count."""
    tasks = [(common, seed, bi, cnt) for bi, cnt in _blocks(reps)]
    if workers <= 1 or len(tasks) == 1:
        return [fn(t) for t in tasks]
    ctx = multiprocessing.get_context("fork")
    with ctx.Pool(workers) as pool:
        return pool.map(fn, tasks, chunksize=1)


# -- block tasks (module level so they pickle) ----------------------------------


def _block_beta_counts(task):
    (alpha, n), seed, bi, cnt = task
    rng = spawn_rng(seed, _LANE_BETA, bi)
    sampler = EventSizeSampler(alpha)
    zs = Counter()
    bs = Counter()
    firsts = Counter()
    for _ in range(cnt):
        z, b, first = beta_block_count_run(alpha, n, rng, sampler)
        zs[z] += 1
        bs[b] += 1
        firsts[first] += 1
    return zs, bs, firsts


def _block_beta_sizes(task):
    (alpha, n), seed, bi, cnt = task
    rng = spawn_rng(seed, _LANE_BETA, bi)
    sampler = EventSizeSampler(alpha)
    s1 = s2 = 0.0
    for _ in range(cnt):
        stats = beta_chain_stats(alpha, n, rng, sampler)
        f = stats.largest_block_fraction
        s1 += f
        s2 += f * f
    return s1, s2, cnt


def _block_prune_counts(task):
    (alpha, n), seed, bi, cnt = task
    rng = spawn_rng(seed, _LANE_PRUNE, bi)
    trees = sample_many_gw_with_n_leaves(alpha, n, cnt, rng)
    zs = Counter()
    bs = Counter()
    firsts = Counter()
    for tree in trees:
        stats = prune_chain_stats(tree, rng)
        zs[stats.z] += 1
        bs[stats.b] += 1
        firsts[stats.first_event_size] += 1
    return zs, bs, firsts


def _block_limit_b(task):
    (alpha, rs, node_cap), seed, bi, cnt = task
    rng = spawn_rng(seed, _LANE_MISC, bi)
    hist = Counter()
    pow_sums = [0.0] * len(rs)
    pow_sqs = [0.0] * len(rs)
    for _ in range(cnt):
        b = sample_limit_B(alpha, rng, node_cap)
        if b is OVERFLOW:
            hist[-1] += 1
            continue  # r^B below resolution for any r < 1
        hist[b] += 1
        for i, r in enumerate(rs):
            v = r**b
            pow_sums[i] += v
            pow_sqs[i] += v * v
    return hist, pow_sums, pow_sqs, cnt


def _merge_counters(parts):
    out = Counter()
    for c in parts:
        out.update(c)
    return out


def run_experiment(name, *, alpha, n=None, reps, seed, workers=1, engine="beta",
                   rs=(0.3, 0.6, 0.9), node_cap=10_000_000):
    """Named Monte Carlo experiment; returns a DistTable or a McSummary."""
    if name not in EXPERIMENTS:
        raise ValueError("unknown experiment %r" % name)
    if name == "first-event-size":
        if engine == "beta":
            parts = _run_blocks(_block_beta_counts, (alpha, n), reps, seed, workers)
        elif engine == "prune":
            parts = _run_blocks(_block_prune_counts, (alpha, n), reps, seed, workers)
        else:
            raise ValueError("engine must be 'prune' or 'beta'")
        firsts = _merge_counters(p[2] for p in parts)
        return DistTable.from_counts(firsts)
    if name == "z-scaled-moments":
        parts = _run_blocks(_block_beta_counts, (alpha, n), reps, seed, workers)
        zs = _merge_counters(p[0] for p in parts)
        scale = float(n) ** (alpha - 1.0)
        s1 = sum(z * c for z, c in zs.items()) * scale
        s2 = sum(z * z * c for z, c in zs.items()) * scale * scale
        sums = {"scaled_z_mean": (s1, s2, reps)}
        summary = McSummary.from_moments(sums, reps, seed, workers)
        summary.estimates["limit_mean"] = z_moment(alpha, 1)
        return summary
    if name == "b-histogram":
        parts = _run_blocks(_block_beta_counts, (alpha, n), reps, seed, workers)
        bs = _merge_counters(p[1] for p in parts)
        return DistTable.from_counts(bs)
    if name == "largest-block-fraction":
        parts = _run_blocks(_block_beta_sizes, (alpha, n), reps, seed, workers)
        s1 = sum(p[0] for p in parts)
        s2 = sum(p[1] for p in parts)
        return McSummary.from_moments(
            {"largest_block_fraction": (s1, s2, reps)}, reps, seed, workers
        )
    if name == "b-limit-histogram":
        parts = _run_blocks(
            _block_limit_b, (alpha, (), node_cap), reps, seed, workers
        )
        return DistTable.from_counts(_merge_counters(p[0] for p in parts))
    if name == "r-power-B":
        parts = _run_blocks(
            _block_limit_b, (alpha, tuple(rs), node_cap), reps, seed, workers
        )
        sums = {}
        for i, r in enumerate(rs):
            s1 = sum(p[1][i] for p in parts)
            s2 = sum(p[2][i] for p in parts)
            sums["r=%g" % r] = (s1, s2, reps)
        return McSummary.from_moments(sums, reps, seed, workers)
    # two-sample-traces
    prune_parts = _run_blocks(_block_prune_counts, (alpha, n), reps, seed, workers)
    beta_parts = _run_blocks(_block_beta_counts, (alpha, n), reps, seed, workers)
    est = {}
    for label, idx in (("first", 2), ("z", 0)):
        c1 = _merge_counters(p[idx] for p in prune_parts)
        c2 = _merge_counters(p[idx] for p in beta_parts)
        res = two_sample_chi_square(c1, c2)
        est["chi2_%s" % label] = res.statistic
        est["dof_%s" % label] = float(res.dof)
        est["accept_%s" % label] = 1.0 if res.accept else 0.0
    return McSummary(reps, est, {}, {}, seed, workers)


# -- chi-square machinery --------------------------------------------------------


@dataclass(frozen=True)
class ChiSquareResult:
    statistic: float
    dof: int
    critical: float
    accept: bool
    pooled_cells: int


def _pool_cells(keys, expected_masses, min_expected):
    """Group keys whose expected count is below the threshold into one tail
    cell; returns list of key-groups."""
    big, small = [], []
    for key, e in zip(keys, expected_masses):
        (big if e >= min_expected else small).append(key)
    groups = [[k] for k in big]
    if small:
        groups.append(small)
    return groups


def chi_square_gof(counts, expected: DistTable, level: float = 0.999) -> ChiSquareResult:
    """Pearson goodness-of-fit of observed counts against an exact table.

    Cells with expected count below 10 are pooled into a tail cell; the
    decision compares to the fixed `level` quantile.
    """
    counts = dict(counts)
    if not counts or not expected.table:
        raise ValueError("empty table")
    total = sum(counts.values())
    keys = sorted(set(counts) | set(expected.table), key=str)
    masses = [expected.get(k) * total for k in keys]
    groups = _pool_cells(keys, masses, 10.0)
    if len(groups) < 2:
        raise ValueError("fewer than two cells after pooling: dof would be 0")
    stat = 0.0
    for group in groups:
        o = sum(counts.get(k, 0) for k in group)
        e = sum(expected.get(k) * total for k in group)
        if e <= 0.0:
            if o:
                stat = float("inf")
            continue
        stat += (o - e) ** 2 / e
    dof = len(groups) - 1
    crit = float(chi2.ppf(level, dof))
    return ChiSquareResult(stat, dof, crit, stat <= crit, len(groups))


def two_sample_chi_square(counts1, counts2, level: float = 0.999) -> ChiSquareResult:
    """Two-sample homogeneity test on pooled proportions."""
    counts1, counts2 = dict(counts1), dict(counts2)
    n1 = sum(counts1.values())
    n2 = sum(counts2.values())
    if n1 == 0 or n2 == 0:
        raise ValueError("empty sample")
    keys = sorted(set(counts1) | set(counts2), key=str)
    pooled = [(counts1.get(k, 0) + counts2.get(k, 0)) / (n1 + n2) for k in keys]
    min_n = min(n1, n2)
    groups = _pool_cells(keys, [p * min_n for p in pooled], 10.0)
    if len(groups) < 2:
        raise ValueError("fewer than two cells after pooling: dof would be 0")
    stat = 0.0
    for group in groups:
        p = sum(
            (counts1.get(k, 0) + counts2.get(k, 0)) for k in group
        ) / (n1 + n2)
        for counts, nn in ((counts1, n1), (counts2, n2)):
            o = sum(counts.get(k, 0) for k in group)
            e = nn * p
            stat += (o - e) ** 2 / e
    dof = len(groups) - 1
    crit = float(chi2.ppf(level, dof))
    return ChiSquareResult(stat, dof, crit, stat <= crit, len(groups))


# -- statistical verification suites ----------------------------------------------


def verify_b_convergence(seed: int, workers: int = 1, reps: int = 100_000,
                         alpha: float = 0.5, ns=(100, 400, 1600),
                         final_tol: float = 0.05, m_max: int = 5000):
    """Empirical final-merge block histograms against the limit table: the
    TV distance must decrease along ns and end below final_tol."""
    limit = DistTable(
        {m: p for m, p in enumerate(b_pmf_table(alpha, m_max)) if p > 0.0}
    )
    rows = []
    tvs = []
    for n in ns:
        hist = run_experiment(
            "b-histogram", alpha=alpha, n=n, reps=reps, seed=seed, workers=workers
        )
        tv = tv_distance(hist, limit)
        tvs.append(tv)
        rows.append(
            VerifyRow("bn", "alpha=%.6f n=%d tv" % (alpha, n), tv, 1.0, True)
        )
    decreasing = all(tvs[i + 1] < tvs[i] for i in range(len(tvs) - 1))
    rows.append(
        VerifyRow("bn", "tv strictly decreasing", float(decreasing), 1.0,
                  decreasing)
    )
    rows.append(
        VerifyRow("bn", "final tv", tvs[-1], final_tol, tvs[-1] < final_tol)
    )
    return rows


def verify_z_trend(seed: int, workers: int = 1, reps: int = 10_000,
                   alpha: float = 0.5, ns=(256, 1024, 4096),
                   bracket=(0.70, 1.10)):
    """Mean of the rescaled cut count against its limit: the deviation must
    shrink along ns and the final mean must land in the stated bracket."""
    limit = z_moment(alpha, 1)
    rows = []
    devs = []
    mean = None
    for n in ns:
        summary = run_experiment(
            "z-scaled-moments", alpha=alpha, n=n, reps=reps, seed=seed,
            workers=workers
        )
        mean = summary.estimates["scaled_z_mean"]
        devs.append(abs(mean - limit))
        rows.append(
            VerifyRow("zn", "alpha=%.6f n=%d mean" % (alpha, n), mean, 1.0, True)
        )
    decreasing = all(devs[i + 1] < devs[i] for i in range(len(devs) - 1))
    rows.append(
        VerifyRow("zn", "deviation strictly decreasing", float(decreasing), 1.0,
                  decreasing)
    )
    lo, hi = bracket[0] * limit, bracket[1] * limit
    in_bracket = lo <= mean <= hi
    rows.append(VerifyRow("zn", "final mean in [%.4f, %.4f]" % (lo, hi), mean,
                          hi, in_bracket))
    return rows
