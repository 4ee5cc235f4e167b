"""Random tree generation: critical trees, leaf-count conditioning by
rejection, cut-intensity-tilted trees, size-biased spine trees, and the
limit block count of the final merge.

All randomness flows through numpy Generators.  Child streams derived from
``(seed, task-index)`` via SeedSequence spawn keys are independent by
construction, which is what the Monte Carlo harness relies on for
worker-count-independent results.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .offspring import (
    leaf_count_pmf,
    offspring_pmf_pruned,
    offspring_pmf_table,
    require_sim_alpha,
    require_theta,
)
from .trees import Tree

DEFAULT_NODE_CAP = 10_000_000

_TABLE_START = 64
_TABLE_MAX = 1 << 20
_WALK_CHUNK = 1 << 16


class _OverflowType:
    """Sentinel for samplers that hit a size cap; a value, not an error."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "OVERFLOW"


OVERFLOW = _OverflowType()


def make_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed))


def spawn_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent child stream for (seed, task-index...)."""
    return np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(k) for k in key))
    )


class OffspringSampler:
    """Inverse-CDF sampler over a lazily extended cumulative table.

    ``ratio_fn(k)`` gives pmf(k+1)/pmf(k) for k >= 2, so the unbounded tail
    is generated on demand; draws beyond the table walk the recurrence in
    chunks without storing it.
    """

    def __init__(self, head_pmf, ratio_fn):
        head = np.asarray(head_pmf, dtype=float)
        self._ratio_fn = ratio_fn
        self._k = len(head) - 1
        self._plast = float(head[-1])
        cum = np.cumsum(head)
        if self._plast == 0.0:
            cum[-1] = 1.0  # support exhausted: cdf is exactly 1 here
        self._cum = cum

    def _extend(self) -> bool:
        if self._k >= _TABLE_MAX or self._plast == 0.0:
            return False
        ks = np.arange(self._k, 2 * self._k, dtype=float)
        pmfs = self._plast * np.cumprod(self._ratio_fn(ks))
        cums = self._cum[-1] + np.cumsum(pmfs)
        self._cum = np.concatenate([self._cum, cums])
        self._k = 2 * self._k
        self._plast = float(pmfs[-1])
        if self._plast == 0.0:
            self._cum[-1] = 1.0
        return True

    def _tail_walk(self, u: float) -> int:
        k, p, c = self._k, self._plast, float(self._cum[-1])
        chunk = _WALK_CHUNK
        while True:
            ks = np.arange(k, k + chunk, dtype=float)
            pmfs = p * np.cumprod(self._ratio_fn(ks))
            cums = c + np.cumsum(pmfs)
            hit = np.searchsorted(cums, u, side="right")
            if hit < chunk:
                return k + 1 + int(hit)
            k += chunk
            p = float(pmfs[-1])
            c = float(cums[-1])
            if p == 0.0:
                return k  # fp-exhausted tail; mass beyond is below resolution
            chunk = min(chunk * 2, 1 << 24)

    def draw(self, rng, size):
        u = rng.random(size)
        flat = np.atleast_1d(u).ravel()
        idx = np.searchsorted(self._cum, flat, side="right")
        over = np.flatnonzero(idx == self._cum.size)
        while over.size and self._extend():
            idx[over] = np.searchsorted(self._cum, flat[over], side="right")
            over = over[idx[over] == self._cum.size]
        for pos in over:
            idx[pos] = self._tail_walk(float(flat[pos]))
        return idx.reshape(np.shape(u)).astype(np.int64)

    def draw_one(self, rng) -> int:
        return int(self.draw(rng, 1)[0])


@lru_cache(maxsize=64)
def _critical_sampler(alpha: float) -> OffspringSampler:
    g = 1.0 / alpha
    head = offspring_pmf_table(alpha, _TABLE_START)
    return OffspringSampler(head, lambda ks: (ks - g) / (ks + 1.0))


@lru_cache(maxsize=64)
def _pruned_sampler(alpha: float, theta: float) -> OffspringSampler:
    g = 1.0 / alpha
    head = offspring_pmf_table(alpha, _TABLE_START)
    ks = np.arange(_TABLE_START + 1, dtype=float)
    head = head * np.exp((1.0 - ks) * math.log1p(theta))
    head[0] = offspring_pmf_pruned(alpha, theta, 0)
    scale = 1.0 / (1.0 + theta)
    return OffspringSampler(head, lambda ks: scale * (ks - g) / (ks + 1.0))


@lru_cache(maxsize=64)
def _star_sampler(alpha: float) -> OffspringSampler:
    """Size-biased offspring law k*nu(k); the critical mean is 1, so no
    renormalization."""
    g = 1.0 / alpha
    head = offspring_pmf_table(alpha, _TABLE_START) * np.arange(_TABLE_START + 1)
    return OffspringSampler(head, lambda ks: (ks - g) / ks)


# -- unconditioned trees -----------------------------------------------------


def sample_gw(alpha, rng, max_leaves: int):
    """Depth-first critical tree; OVERFLOW as soon as the leaf count exceeds
    ``max_leaves`` (node count is then <= 2*max_leaves - 1)."""
    alpha = require_sim_alpha(alpha)
    if max_leaves < 1:
        raise ValueError("max_leaves must be positive")
    sampler = _critical_sampler(alpha)
    counts = []
    walk = 0
    leaves = 0
    chunk = 32
    while True:
        for x in sampler.draw(rng, chunk):
            x = int(x)
            counts.append(x)
            if x == 0:
                leaves += 1
                if leaves > max_leaves:
                    return OVERFLOW
                walk -= 1
                if walk < 0:
                    return Tree.from_child_counts(counts)
            else:
                walk += x - 1
        chunk = min(chunk * 2, 4096)


def sample_gw_leaf_counts(alpha, rng, reps: int, max_leaves: int) -> np.ndarray:
    """Leaf counts of ``reps`` independent critical trees, -1 where the tree
    overflowed ``max_leaves``.  Same law as ``sample_gw`` without building
    trees."""
    alpha = require_sim_alpha(alpha)
    sampler = _critical_sampler(alpha)
    cap = max_leaves + 1
    out = np.empty(reps, dtype=np.int64)
    ids = np.arange(reps)
    W = np.zeros(reps, dtype=np.int64)
    Z = np.zeros(reps, dtype=np.int64)
    slab = 16
    while ids.size:
        X = sampler.draw(rng, (ids.size, slab))
        cw = W[:, None] + np.cumsum(X - 1, axis=1)
        cz = Z[:, None] + np.cumsum(X == 0, axis=1)
        comp = cw == -1
        dead = cz == cap
        comp_any = comp.any(axis=1)
        dead_any = dead.any(axis=1)
        j1 = comp.argmax(axis=1)
        j2 = dead.argmax(axis=1)
        finished = comp_any & (~dead_any | (j1 <= j2))
        if finished.any():
            rows = np.flatnonzero(finished)
            zat = cz[rows, j1[rows]]
            ok = zat <= max_leaves
            out[ids[rows[ok]]] = zat[ok]
            out[ids[rows[~ok]]] = -1
        aborted = dead_any & ~finished
        out[ids[aborted]] = -1
        alive = ~(comp_any | dead_any)
        ids = ids[alive]
        W = cw[alive, -1]
        Z = cz[alive, -1]
    return out


# -- conditioning on the leaf count by rejection ------------------------------


_KERNEL_TABLE = 1 << 16


@lru_cache(maxsize=16)
def _kernel_cdf(alpha: float):
    pmf = offspring_pmf_table(alpha, _KERNEL_TABLE)
    return np.cumsum(pmf), float(pmf[-1])


def sample_many_gw_with_n_leaves(alpha, n: int, count: int, rng) -> list:
    """Exact conditional samples via rejection with early abort.

    The hot loop is compiled; trees stream off the Generator one trial after
    another, so results depend only on (rng state, alpha, n, count).
    """
    from ._kernels import rejection_fill

    alpha = require_sim_alpha(alpha)
    n = int(n)
    if n < 1:
        raise ValueError("n must be positive")
    if count <= 0:
        return []
    cum, plast = _kernel_cdf(alpha)
    g = 1.0 / alpha
    maxn = 2 * n - 1
    out = []
    chunk = max(1, min(count, (1 << 23) // maxn))
    buf = np.empty((chunk, maxn), dtype=np.int32)
    sizes = np.empty(chunk, dtype=np.int32)
    while len(out) < count:
        take = min(chunk, count - len(out))
        rejection_fill(rng, cum, plast, g, n, buf[:take], sizes[:take])
        for i in range(take):
            out.append(Tree.from_child_counts(buf[i, : sizes[i]]))
    return out


def sample_gw_with_n_leaves(alpha, n: int, rng) -> Tree:
    """Exact sample of the critical tree conditioned on n leaves."""
    return sample_many_gw_with_n_leaves(alpha, n, 1, rng)[0]


# -- trees under the cut-tilted law -------------------------------------------


def sample_pruned_gw(
    alpha, theta, rng, max_leaves=None, node_cap: int = DEFAULT_NODE_CAP
):
    """Tree with the intensity-theta offspring law; subcritical for theta > 0."""
    alpha = require_sim_alpha(alpha)
    theta = require_theta(theta)
    sampler = _pruned_sampler(alpha, theta)
    counts = []
    walk = 0
    leaves = 0
    chunk = 32
    while True:
        for x in sampler.draw(rng, chunk):
            x = int(x)
            counts.append(x)
            if x == 0:
                leaves += 1
                if max_leaves is not None and leaves > max_leaves:
                    return OVERFLOW
                walk -= 1
                if walk < 0:
                    return Tree.from_child_counts(counts)
            else:
                walk += x - 1
        if len(counts) > node_cap:
            return OVERFLOW
        chunk = min(chunk * 2, 4096)


@lru_cache(maxsize=16)
def _kernel_star_cdf(alpha: float):
    pmf = offspring_pmf_table(alpha, _KERNEL_TABLE) * np.arange(_KERNEL_TABLE + 1)
    return np.cumsum(pmf), float(pmf[-1])


# -- size-biased spine trees ---------------------------------------------------


def sample_kesten_truncated(alpha, h: int, rng, node_cap: int = DEFAULT_NODE_CAP):
    """Depth-h truncation of the size-biased tree plus its spine prefix.

    Spine nodes reproduce with the size-biased law, everything else with the
    critical law; the spine child is uniform among the spine node's children.
    Returns (tree, spine preorder indices) or OVERFLOW.
    """
    alpha = require_sim_alpha(alpha)
    h = int(h)
    if h < 0:
        raise ValueError("h must be non-negative")
    star = _star_sampler(alpha)
    crit = _critical_sampler(alpha)
    levels = []  # per depth: child counts of that generation, left to right
    spine_idx = [0]  # index within each generation
    width = 1
    total = 1
    for depth in range(h):
        ks = crit.draw(rng, width)
        k_spine = star.draw_one(rng)
        ks[spine_idx[depth]] = k_spine
        total += int(ks.sum())
        if total > node_cap:
            return OVERFLOW
        v = int(rng.integers(0, k_spine))
        spine_idx.append(int(ks[: spine_idx[depth]].sum()) + v)
        levels.append([int(x) for x in ks])
        width = int(ks.sum())
    counts = []
    pre_of = {}
    stack = [(0, 0)]
    while stack:
        d, i = stack.pop()
        pre_of[(d, i)] = len(counts)
        k = 0 if d == h else levels[d][i]
        counts.append(k)
        if k:
            base = sum(levels[d][:i])
            stack.extend((d + 1, base + j) for j in range(k - 1, -1, -1))
    tree = Tree.from_child_counts(counts)
    spine = [pre_of[(d, spine_idx[d])] for d in range(h + 1)]
    return tree, spine


def sample_pruned_kesten(alpha, theta, rng, node_cap: int = DEFAULT_NODE_CAP):
    """Spine tree cut at intensity theta; almost surely finite for theta > 0.

    Walk down the spine: each spine node takes the size-biased degree K, is
    turned into a leaf with probability 1 - (1+theta)^(1-K), and otherwise
    hangs K-1 independent intensity-theta trees beside the spine.
    """
    alpha = require_sim_alpha(alpha)
    theta = require_theta(theta)
    if theta <= 0.0:
        raise ValueError("theta must be positive")
    star = _star_sampler(alpha)
    budget = node_cap
    segments = []
    while True:
        k = star.draw_one(rng)
        budget -= 1
        if budget <= 0:
            return OVERFLOW
        if rng.random() < -math.expm1((1.0 - k) * math.log1p(theta)):
            shape = ()
            break
        v = int(rng.integers(0, k))
        sibs = []
        for _ in range(k - 1):
            t = sample_pruned_gw(alpha, theta, rng, node_cap=budget)
            if t is OVERFLOW:
                return OVERFLOW
            budget -= t.n_nodes
            sibs.append(t.to_shape())
        segments.append((v, sibs))
    for v, sibs in reversed(segments):
        shape = tuple(sibs[:v] + [shape] + sibs[v:])
    return Tree.from_shape(shape)


def _pruned_kesten_leaf_count(alpha, theta, rng, node_cap: int):
    """Leaf count of one cut spine tree; -1 past the cap.  theta == 0 makes
    the cut probability vanish, so only the cap stops that walk."""
    from ._kernels import pruned_spine_leaf_count

    cum, plast = _kernel_cdf(alpha)
    star_cum, star_plast = _kernel_star_cdf(alpha)
    return int(
        pruned_spine_leaf_count(
            rng, star_cum, star_plast, cum, plast, 1.0 / alpha,
            math.log1p(theta), node_cap
        )
    )


def sample_limit_B(alpha, rng, node_cap: int = DEFAULT_NODE_CAP):
    """Limit law of the block count of the final merge.

    Draw the size-biased root degree K, the root's cut time from
    P(xi >= t) = (1+t)^(1-K), then count leaves of one cut spine tree plus
    K-1 cut ordinary trees, all at intensity xi.  Always >= 2.
    """
    from ._kernels import limit_block_count

    alpha = require_sim_alpha(alpha)
    cum, plast = _kernel_cdf(alpha)
    star_cum, star_plast = _kernel_star_cdf(alpha)
    b = int(
        limit_block_count(rng, star_cum, star_plast, cum, plast, 1.0 / alpha,
                          node_cap)
    )
    return OVERFLOW if b < 0 else b
