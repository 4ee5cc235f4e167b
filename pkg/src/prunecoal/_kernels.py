"""Compiled hot loop for leaf-count-conditioned rejection sampling.

numba's Generator support advances the underlying bit generator exactly as
numpy does, so draws made here are part of the same deterministic stream as
the surrounding python code.
"""

import math

import numpy as np
from numba import njit


@njit(inline="always")
def _inv_cdf(rng, cum, plast, gamma, shift):
    # tail ratio pmf(j+1)/pmf(j) = (j - gamma)/(j + shift):
    # shift 1 for the critical law, 0 for its size-biased version
    u = rng.random()
    if u < cum[4]:
        k = 0
        while u >= cum[k]:
            k += 1
        return k
    k = np.searchsorted(cum, u, side="right")
    top = cum.size - 1
    if k > top:
        j = top
        p = plast
        c = cum[top]
        while u >= c and p > 0.0:
            p *= (j - gamma) / (j + shift)
            j += 1
            c += p
        k = j
    return k


@njit(cache=True)
def rejection_fill(rng, cum, plast, gamma, n, out, sizes):
    """Fill ``out`` with preorder child-count sequences of trees accepted by
    rejection: a trial aborts at its (n+1)-th leaf or past 2n-1 nodes, and
    accepts when the exploration walk closes with exactly n leaves.

    cum is the offspring cdf table, plast the pmf at its last index; the tail
    beyond the table follows the ratio (k - gamma) / (k + 1).
    """
    want, maxn = out.shape
    accepted = 0
    scratch = np.empty(maxn, np.int32)
    while accepted < want:
        walk = 0
        zeros = 0
        pos = 0
        while True:
            k = _inv_cdf(rng, cum, plast, gamma, 1.0)
            if pos < maxn:
                scratch[pos] = k
            pos += 1
            if k == 0:
                zeros += 1
                if zeros > n:
                    break
                walk -= 1
                if walk < 0:
                    if zeros == n:
                        out[accepted, :pos] = scratch[:pos]
                        sizes[accepted] = pos
                        accepted += 1
                    break
            else:
                walk += k - 1
            if pos >= maxn:
                break  # longer than any tree with n leaves
    return accepted


@njit(cache=True)
def pruned_walk_leaf_count(rng, cum, plast, gamma, log1p_theta, node_cap):
    """(leaf count, nodes) of one cut-tilted tree; leaf count -1 past the cap.

    Draws critical degrees and thins: a node with k >= 2 children keeps them
    with probability (1 + theta)^(1-k), otherwise it becomes a leaf.  This is
    the cut construction itself, so no per-theta table is needed.
    """
    walk = 0
    leaves = 0
    nodes = 0
    while True:
        k = _inv_cdf(rng, cum, plast, gamma, 1.0)
        if k >= 2 and log1p_theta > 0.0:
            if rng.random() >= math.exp((1.0 - k) * log1p_theta):
                k = 0
        nodes += 1
        if nodes > node_cap:
            return -1, nodes
        if k == 0:
            leaves += 1
            walk -= 1
            if walk < 0:
                return leaves, nodes
        else:
            walk += k - 1


@njit(cache=True)
def pruned_spine_leaf_count(rng, star_cum, star_plast, cum, plast, gamma,
                            log1p_theta, node_cap):
    """Leaf count of the cut spine tree, or -1 past the cap.

    Spine nodes take size-biased degrees; a spine node is turned into a leaf
    with probability 1 - (1+theta)^(1-K), else K-1 cut-tilted trees hang off
    it and the walk moves down.
    """
    budget = node_cap
    leaves = 0
    while True:
        k = _inv_cdf(rng, star_cum, star_plast, gamma, 0.0)
        budget -= 1
        if budget <= 0:
            return -1
        if rng.random() < -math.expm1((1.0 - k) * log1p_theta):
            return leaves + 1
        for _ in range(k - 1):
            lc, nodes = pruned_walk_leaf_count(rng, cum, plast, gamma,
                                               log1p_theta, budget)
            if lc < 0:
                return -1
            budget -= nodes
            leaves += lc


@njit(cache=True)
def limit_block_count(rng, star_cum, star_plast, cum, plast, gamma, node_cap):
    """One draw of the limit block count of the final merge, or -1 on cap.

    Size-biased root degree K, cut time xi with survival (1+t)^(1-K), then
    one cut spine tree plus K-1 cut ordinary trees, all at intensity xi.
    """
    k = _inv_cdf(rng, star_cum, star_plast, gamma, 0.0)
    u = 1.0 - rng.random()  # uniform on (0, 1]
    xi = u ** (-1.0 / (k - 1)) - 1.0
    l1p = math.log1p(xi)
    total = pruned_spine_leaf_count(rng, star_cum, star_plast, cum, plast,
                                    gamma, l1p, node_cap)
    if total < 0:
        return -1
    budget = node_cap
    for _ in range(k - 1):
        lc, nodes = pruned_walk_leaf_count(rng, cum, plast, gamma, l1p, budget)
        if lc < 0:
            return -1
        budget -= nodes
        total += lc
    return total
