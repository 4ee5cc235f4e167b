import math
from collections import Counter

import numpy as np
import pytest

from prunecoal import mc, oracle
from prunecoal.offspring import (
    gf_g_theta,
    h_theta_prime,
    leaf_count_pmf,
    offspring_pmf,
)
from prunecoal.sampler import (
    OVERFLOW,
    OffspringSampler,
    _critical_sampler,
    _pruned_kesten_leaf_count,
    make_rng,
    sample_gw,
    sample_gw_leaf_counts,
    sample_gw_with_n_leaves,
    sample_kesten_truncated,
    sample_limit_B,
    sample_many_gw_with_n_leaves,
    sample_pruned_gw,
    sample_pruned_kesten,
    spawn_rng,
)
from prunecoal.specfun import phi_alpha


class StubRng:
    """Feeds fixed uniforms; enough of the Generator surface for unit tests."""

    def __init__(self, values):
        self.values = list(values)

    def random(self, size=None):
        if size is None:
            return self.values.pop(0)
        n = int(np.prod(size))
        out = np.array([self.values.pop(0) for _ in range(n)])
        return out.reshape(size)


def expected_table(probs):
    return oracle.DistTable(probs)


def test_inverse_cdf_far_tail_is_exact():
    from prunecoal.offspring import offspring_pmf_table

    s = OffspringSampler(
        offspring_pmf_table(0.9, 64), lambda ks: (ks - 1.0 / 0.9) / (ks + 1.0)
    )
    tab = offspring_pmf_table(0.9, 3000)
    cum = np.cumsum(tab)
    u = float(cum[1500]) + 0.5 * float(tab[1501])
    assert s.draw(StubRng([u]), 1)[0] == 1501
    assert s.draw(StubRng([1.0 - 1e-7]), 1)[0] > 64


def test_sample_gw_single_root_probability():
    # the first draw decides: single root with probability alpha
    rng = make_rng(100)
    n_draws = 20000
    singles = 0
    for _ in range(n_draws):
        t = sample_gw(0.7, rng, 5)
        if t is not OVERFLOW and t.n_nodes == 1:
            singles += 1
    p = 0.7
    assert abs(singles / n_draws - p) < 3 * math.sqrt(p * (1 - p) / n_draws)


def test_sample_gw_branching_is_binary_at_half():
    # trees only ever branch 0/2 wide, and the raw offspring stream the
    # sampler consumes has frequencies {1/2, 0, 1/2}
    rng = make_rng(101)
    for _ in range(2000):
        t = sample_gw(0.5, rng, 12)
        if t is not OVERFLOW:
            assert set(t.child_counts) <= {0, 2}
    draws = Counter(int(x) for x in _critical_sampler(0.5).draw(rng, 100_000))
    assert set(draws) == {0, 2}
    res = mc.chi_square_gof(draws, expected_table({0: 0.5, 2: 0.5}))
    assert res.accept


def test_sample_gw_overflow_contract():
    rng = make_rng(102)
    hits = sum(1 for _ in range(400) if sample_gw(0.9, rng, 1) is OVERFLOW)
    assert hits > 0  # any tree beyond a single root overflows a cap of 1
    for _ in range(50):
        t = sample_gw(0.9, rng, 4)
        if t is not OVERFLOW:
            assert t.leaf_count() <= 4
            assert t.n_nodes <= 2 * 4 - 1


def test_leaf_count_frequencies_match_pmf():
    rng = make_rng(0xF00D)
    reps = 1_000_000
    lc = sample_gw_leaf_counts(0.5, rng, reps, 10)
    for n in range(1, 11):
        emp = float((lc == n).mean())
        q = leaf_count_pmf(0.5, n)
        assert abs(emp - q) < 3 * math.sqrt(q * (1 - q) / reps)


def test_batched_and_sequential_leaf_counts_agree_in_law():
    rng = make_rng(55)
    seq = Counter()
    for _ in range(20000):
        t = sample_gw(0.7, rng, 6)
        seq[-1 if t is OVERFLOW else t.leaf_count()] += 1
    batched = Counter(
        int(x) for x in sample_gw_leaf_counts(0.7, make_rng(56), 20000, 6)
    )
    res = mc.two_sample_chi_square(seq, batched)
    assert res.accept


def test_conditioned_sampler_trivial_sizes():
    rng = make_rng(1)
    for _ in range(20):
        assert sample_gw_with_n_leaves(0.6, 1, rng).n_nodes == 1
    for _ in range(20):
        t = sample_gw_with_n_leaves(0.6, 2, rng)
        assert t.child_counts == (2, 0, 0)


def test_conditioned_shape_frequencies():
    # fixed-seed regression: chi-square against the exact tree law
    reps = 20000
    for alpha in (0.5, 2.0 / 3.0):
        for n in (3, 4):
            rng = make_rng(0xC0A1)
            counts = Counter(
                t.shape_key()
                for t in sample_many_gw_with_n_leaves(alpha, n, reps, rng)
            )
            res = mc.chi_square_gof(counts, oracle.tree_law_table(alpha, n))
            assert res.accept, (alpha, n, res)


def test_conditioned_sampler_validity_and_determinism():
    a = sample_many_gw_with_n_leaves(0.8, 17, 50, make_rng(9))
    b = sample_many_gw_with_n_leaves(0.8, 17, 50, make_rng(9))
    assert a == b
    for t in a:
        assert t.leaf_count() == 17
        assert t.is_gw_valid()
        assert t.leaves_nodes_identity()
    with pytest.raises(ValueError):
        sample_gw_with_n_leaves(0.4, 5, make_rng(0))


def test_spawned_streams_differ():
    a = spawn_rng(7, 0, 1).random(4)
    b = spawn_rng(7, 0, 2).random(4)
    c = spawn_rng(7, 0, 1).random(4)
    assert not np.array_equal(a, b)
    assert np.array_equal(a, c)


def test_pruned_gw_at_zero_intensity_is_critical():
    # identical cdf tables make the draw streams byte-equal
    t1 = sample_pruned_gw(0.7, 0.0, make_rng(3), max_leaves=50)
    t2 = sample_gw(0.7, make_rng(3), 50)
    assert t1 == t2


def test_pruned_gw_offspring_frequencies():
    from prunecoal.sampler import _pruned_sampler

    rng = make_rng(4)
    draws = Counter(int(x) for x in _pruned_sampler(0.5, 1.0).draw(rng, 100_000))
    res = mc.chi_square_gof(draws, expected_table({0: 0.75, 2: 0.25}))
    assert res.accept
    for _ in range(2000):
        t = sample_pruned_gw(0.5, 1.0, rng)
        assert set(t.child_counts) <= {0, 2}


def test_pruned_gw_single_root_probability():
    rng = make_rng(5)
    reps = 20000
    p = gf_g_theta(0.5, 1.0, 0.0)
    singles = sum(
        1 for _ in range(reps) if sample_pruned_gw(0.5, 1.0, rng).n_nodes == 1
    )
    assert abs(singles / reps - p) < 3 * math.sqrt(p * (1 - p) / reps)


def test_kesten_truncated_basics():
    t, spine = sample_kesten_truncated(0.5, 0, make_rng(6))
    assert t.n_nodes == 1 and spine == [0]
    t, spine = sample_kesten_truncated(0.5, 6, make_rng(7))
    assert len(spine) == 7
    # at alpha = 1/2 the size-biased law is concentrated on degree 2
    assert all(t.child_counts[u] == 2 for u in spine[:-1])
    assert t.depths()[spine[-1]] == 6
    assert sample_kesten_truncated(0.9, 40, make_rng(8), node_cap=16) is OVERFLOW


def test_kesten_depth_one_identity():
    # P(root degree = k, spine child at position i) equals the plain
    # offspring mass of k, for every i < k; degrees past the table are
    # folded into a tail cell carrying the exact remaining mass
    alpha = 2.0 / 3.0
    kmax = 60
    rng = make_rng(9)
    reps = 30000
    counts = Counter()
    for _ in range(reps):
        out = sample_kesten_truncated(alpha, 1, rng, node_cap=10_000)
        if out is OVERFLOW:  # a giant first generation is certainly >= kmax
            counts["tail"] += 1
            continue
        t, spine = out
        k = t.child_counts[0]
        counts[(k, spine[1] - 1) if k < kmax else "tail"] += 1
    expected = {}
    for k in range(2, kmax):
        p = offspring_pmf(alpha, k)
        for i in range(k):
            expected[(k, i)] = p
    expected["tail"] = 1.0 - sum(expected.values())
    assert expected["tail"] > 0
    res = mc.chi_square_gof(counts, expected_table(expected))
    assert res.accept


def test_pruned_kesten_tree_and_cut_probability():
    rng = make_rng(10)
    reps = 20000
    # at alpha = 1/2 every spine degree is 2, so the walk stops at each level
    # with probability theta/(1+theta)
    theta = 1.0
    depth1 = 0
    for _ in range(reps):
        t = sample_pruned_kesten(0.5, theta, rng)
        assert t.is_gw_valid() and t.leaves_nodes_identity()
        if t.n_nodes == 1:
            depth1 += 1
    p = theta / (1.0 + theta)
    assert abs(depth1 / reps - p) < 3 * math.sqrt(p * (1 - p) / reps)
    with pytest.raises(ValueError):
        sample_pruned_kesten(0.5, 0.0, make_rng(0))


def pruned_leaf_law(alpha, theta, lmax):
    """Exact leaf-count masses of the cut-tilted tree from the series of its
    generating function (1+theta)(1 - (1 - c r)^alpha)."""
    c = 1.0 - (theta / (1.0 + theta)) ** (1.0 / alpha)
    masses = {}
    a = (1.0 + theta) * alpha * c
    for l in range(1, lmax):
        masses[l] = a
        a *= (l - alpha) / (l + 1.0) * c
    return masses


def test_pruned_leaf_law_series_matches_samples():
    rng = make_rng(11)
    reps = 50000
    masses = pruned_leaf_law(0.5, 1.0, 40)
    assert masses[1] == pytest.approx(0.75)  # single root only
    counts = Counter()
    for _ in range(reps):
        l = sample_pruned_gw(0.5, 1.0, rng).leaf_count()
        counts[l if l < 40 else "tail"] += 1
    expected = dict(masses)
    expected["tail"] = 1.0 - sum(masses.values())
    assert mc.chi_square_gof(counts, expected_table(expected)).accept


def test_pruned_kesten_leaf_law_is_size_biased():
    # leaf histogram of the spine tree against L * (plain cut-tree law) / E[L]
    rng = make_rng(12)
    reps = 50000
    masses = pruned_leaf_law(0.5, 1.0, 60)
    mean = h_theta_prime(0.5, 1.0, 1.0)
    biased = {l: l * p / mean for l, p in masses.items()}
    biased["tail"] = 1.0 - sum(biased.values())
    assert 0 < biased["tail"] < 0.01
    kesten = Counter()
    for _ in range(reps):
        l = _pruned_kesten_leaf_count(0.5, 1.0, rng, 10**7)
        kesten[l if l < 60 else "tail"] += 1
    res = mc.chi_square_gof(kesten, expected_table(biased))
    assert res.accept


def test_pruned_kesten_power_moments():
    rng = make_rng(12)
    reps = 30000
    lcs = np.array(
        [_pruned_kesten_leaf_count(0.5, 1.0, rng, 10**7) for _ in range(reps)],
        dtype=float,
    )
    for r in (0.3, 0.6, 0.9):
        vals = r**lcs
        emp = float(vals.mean())
        se = float(vals.std(ddof=1)) / math.sqrt(reps)
        th = r * h_theta_prime(0.5, 1.0, r) / h_theta_prime(0.5, 1.0, 1.0)
        assert abs(emp - th) < 3 * se


def test_limit_block_count_support():
    rng = make_rng(13)
    for _ in range(3000):
        b = sample_limit_B(0.5, rng)
        if b is not OVERFLOW:
            assert b >= 2


def test_limit_block_count_law():
    # P(B=2) = 5/12 at alpha = 1/2 and E[r^B] matches the quadrature gf.
    # Capped draws are counted as "huge": that leaves P(B=2) unbiased and
    # perturbs E[r^B] below the Monte Carlo floor for r < 1.
    reps = 1_000_000
    hist = mc.run_experiment(
        "b-limit-histogram", alpha=0.5, reps=reps, seed=0xB10C, workers=2,
        node_cap=100_000
    )
    p2 = hist.get(2)
    se = math.sqrt((5.0 / 12.0) * (7.0 / 12.0) / reps)
    assert abs(p2 - 5.0 / 12.0) < 3 * se
    for r in (0.3, 0.6, 0.9):
        moments = [
            (r**b * f, r ** (2 * b) * f) for b, f in hist.items() if b != -1
        ]
        emp = sum(m[0] for m in moments)
        var = sum(m[1] for m in moments) - emp * emp
        th = phi_alpha(0.5, r)
        assert abs(emp - th) < 3 * math.sqrt(var / reps)
