"""Rates and the discrete jump chain of the multiple-merger coalescent with
density (x/(1-x))^alpha on (0, 1).

Only the jump chain is simulated: holding times play no role in the laws
this package verifies.  Given b blocks, k of them merge with probability
C(b,k) * lambda_bk / lambda_b; the k blocks are a uniform k-subset.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln

from .offspring import require_formula_alpha
from .pruning import ChainEvent, ChainStats, ChainTrace
from .trees import Partition

_CACHE_MAX_B = 4200  # per-b cumulative tables above this use the ratio walk


def _check_bk(b: int, k: int):
    if b < 2:
        raise ValueError("need at least 2 blocks, got b=%r" % b)
    if not 2 <= k <= b:
        raise ValueError("event size k must lie in 2..b, got k=%r" % k)


def lambda_bk_log(alpha: float, b: int, k: int) -> float:
    alpha = require_formula_alpha(alpha)
    _check_bk(b, k)
    return gammaln(k + alpha - 1.0) + gammaln(b - k + 1.0 - alpha) - gammaln(b)


def lambda_bk(alpha: float, b: int, k: int) -> float:
    """Rate at which k fixed blocks out of b merge."""
    return math.exp(lambda_bk_log(alpha, b, k))


def lambda_b_log(alpha: float, b: int) -> float:
    alpha = require_formula_alpha(alpha)
    if b < 2:
        raise ValueError("need at least 2 blocks, got b=%r" % b)
    return (
        math.log(b - 1.0)
        + math.log(alpha)
        - math.log(1.0 - alpha)
        + gammaln(alpha)
        + gammaln(b - alpha)
        - gammaln(b)
    )


def lambda_b(alpha: float, b: int) -> float:
    """Total coalescence rate with b blocks."""
    return math.exp(lambda_b_log(alpha, b))


def merge_ratio(alpha: float, n: int, k: int) -> float:
    """Probability that a given set of k blocks is the one that merges."""
    alpha = require_formula_alpha(alpha)
    _check_bk(n, k)
    return math.exp(
        math.log(1.0 - alpha)
        - gammaln(alpha + 1.0)
        + gammaln(k + alpha - 1.0)
        + gammaln(n - k + 1.0 - alpha)
        - gammaln(n - alpha)
        - math.log(n - 1.0)
    )


def event_size_probs(alpha: float, b: int) -> np.ndarray:
    """pmf of the merge size at b blocks, index 0 <-> k=2."""
    alpha = require_formula_alpha(alpha)
    if b < 2:
        raise ValueError("need at least 2 blocks")
    ks = np.arange(2, b + 1, dtype=float)
    logw = (
        gammaln(b + 1.0)
        - gammaln(ks + 1.0)
        - gammaln(b - ks + 1.0)
        + gammaln(ks + alpha - 1.0)
        + gammaln(b - ks + 1.0 - alpha)
        - gammaln(b)
    )
    logw -= logw.max()
    w = np.exp(logw)
    return w / w.sum()


def merge_ratio_checksum(alpha: float, n: int) -> float:
    """sum over k of C(n,k) * merge_ratio; equals 1 for a proper event law."""
    alpha = require_formula_alpha(alpha)
    ks = np.arange(2, n + 1, dtype=float)
    logterms = (
        gammaln(n + 1.0)
        - gammaln(ks + 1.0)
        - gammaln(n - ks + 1.0)
        + math.log(1.0 - alpha)
        - gammaln(alpha + 1.0)
        + gammaln(ks + alpha - 1.0)
        + gammaln(n - ks + 1.0 - alpha)
        - gammaln(n - alpha)
        - math.log(n - 1.0)
    )
    return float(np.exp(logterms).sum())


class EventSizeSampler:
    """Samples the merge size k at b blocks.

    Small b: cached cumulative tables (log-sum-exp normalized).  Large b:
    sequential ratio walk from k=2; its expected step count is the mean
    merge size, so a whole chain costs O(n) total.
    """

    def __init__(self, alpha: float):
        self.alpha = require_formula_alpha(alpha)
        self._tables = {}

    def _table(self, b: int) -> np.ndarray:
        tab = self._tables.get(b)
        if tab is None:
            tab = np.cumsum(event_size_probs(self.alpha, b))
            self._tables[b] = tab
        return tab

    def sample(self, b: int, rng) -> int:
        if b == 2:
            return 2
        u = float(rng.random())
        if b <= _CACHE_MAX_B:
            return 2 + int(np.searchsorted(self._table(b), u, side="right"))
        a = self.alpha
        logp2 = (
            gammaln(b + 1.0)
            - math.log(2.0)
            - gammaln(b - 1.0)
            + lambda_bk_log(a, b, 2)
            - lambda_b_log(a, b)
        )
        p = math.exp(logp2)
        cum = p
        k = 2
        while u >= cum and k < b:
            p *= (b - k) * (k + a - 1.0) / ((k + 1.0) * (b - k - a))
            k += 1
            cum += p
        return k


def _uniform_k_subset(b: int, k: int, rng):
    """Uniform k-subset of range(b) by a partial Fisher-Yates pass."""
    idx = list(range(b))
    for j in range(k):
        swap = j + int(rng.integers(0, b - j))
        idx[j], idx[swap] = idx[swap], idx[j]
    return idx[:k]


def beta_chain(alpha: float, n: int, rng, sampler: EventSizeSampler | None = None) -> ChainTrace:
    """Jump chain started from singletons of {1..n}, run to a single block."""
    alpha = require_formula_alpha(alpha)
    if n < 1:
        raise ValueError("n must be positive")
    sampler = sampler or EventSizeSampler(alpha)
    blocks = [[i] for i in range(1, n + 1)]
    events = []
    step = 0
    while len(blocks) > 1:
        b = len(blocks)
        k = sampler.sample(b, rng)
        chosen = sorted(_uniform_k_subset(b, k, rng))
        merged = tuple(
            sorted((tuple(blocks[i]) for i in chosen), key=lambda blk: blk[0])
        )
        chosen_set = set(chosen)
        new = sorted(x for i in chosen for x in blocks[i])
        blocks = [blocks[i] for i in range(b) if i not in chosen_set] + [new]
        step += 1
        events.append(
            ChainEvent(step, -1, merged, Partition([tuple(x) for x in blocks], n))
        )
    return ChainTrace(n=n, initial=Partition.singletons(n), events=tuple(events))


def beta_chain_stats(alpha: float, n: int, rng, sampler=None) -> ChainStats:
    """Chain over block sizes only."""
    alpha = require_formula_alpha(alpha)
    if n < 1:
        raise ValueError("n must be positive")
    sampler = sampler or EventSizeSampler(alpha)
    sizes = [1] * n
    step = 0
    first_size = None
    last_sizes = None
    while len(sizes) > 1:
        b = len(sizes)
        k = sampler.sample(b, rng)
        chosen = _uniform_k_subset(b, k, rng)
        merged = [sizes[i] for i in chosen]
        for i in sorted(chosen, reverse=True):
            sizes[i] = sizes[-1]
            sizes.pop()
        sizes.append(sum(merged))
        step += 1
        if first_size is None:
            first_size = k
        last_sizes = merged
    if last_sizes is None:
        return ChainStats(n=n, z=0, b=1, first_event_size=None,
                          largest_block_fraction=None)
    return ChainStats(
        n=n,
        z=step,
        b=len(last_sizes),
        first_event_size=first_size,
        largest_block_fraction=max(last_sizes) / n,
    )


def beta_block_count_run(alpha: float, n: int, rng, sampler=None):
    """(z, b, first event size) from the block-count chain alone."""
    sampler = sampler or EventSizeSampler(alpha)
    b = n
    z = 0
    first = None
    last_b = 1
    while b > 1:
        k = sampler.sample(b, rng)
        z += 1
        if first is None:
            first = k
        if k == b:
            last_b = b
        b -= k - 1
    return z, last_b, first
