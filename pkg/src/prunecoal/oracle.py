"""Exact, exhaustive computation at small n.

Enumerates every ordered no-unary tree with a given leaf count, unrolls the
exact trajectory law of both the node-cut chain and the multiple-merger jump
chain, and verifies their equality plus the closed-form rates.  Sizes are
hard-capped; everything here is meant to be exact, not fast.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

from .coalescent import merge_ratio
from .offspring import mean_root_excess, tree_log_prob_given_leaves
from .trees import Tree, partition_key

MAX_ENUM_LEAVES = 8
MAX_TRAJECTORY_N = 5
MAX_POST_EVENT_N = 6


class ResourceLimitError(ValueError):
    """Raised when an exact computation would be combinatorially explosive."""


class DistTable:
    """Finite probability table keyed by canonical strings."""

    def __init__(self, mapping, tol: float = 1e-12):
        self.table = dict(mapping)
        self.tol = tol
        for v in self.table.values():
            if v < -1e-15:
                raise ValueError("negative probability %r" % v)

    def total(self) -> float:
        return sum(self.table.values())

    def get(self, key, default=0.0):
        return self.table.get(key, default)

    def items(self):
        return self.table.items()

    def check_normalized(self) -> bool:
        return abs(self.total() - 1.0) <= self.tol

    @staticmethod
    def from_counts(counts) -> "DistTable":
        total = sum(counts.values())
        if total <= 0:
            raise ValueError("empty count table")
        return DistTable({k: v / total for k, v in counts.items()})


def tv_distance(d1: DistTable, d2: DistTable) -> float:
    keys = set(d1.table) | set(d2.table)
    return 0.5 * sum(abs(d1.get(k) - d2.get(k)) for k in keys)


# -- tree enumeration ----------------------------------------------------------


@lru_cache(maxsize=None)
def _shapes(n: int):
    """All ordered no-unary shapes with n leaves, as nested tuples."""
    if n == 1:
        return ((),)
    out = []
    for k in range(2, n + 1):
        for comp in _compositions(n, k):
            for kids in itertools.product(*(_shapes(c) for c in comp)):
                out.append(tuple(kids))
    return tuple(out)


@lru_cache(maxsize=None)
def _compositions(n: int, k: int):
    if k == 1:
        return ((n,),)
    out = []
    for first in range(1, n - k + 2):
        for rest in _compositions(n - first, k - 1):
            out.append((first,) + rest)
    return tuple(out)


def shape_count(n: int) -> int:
    """Independent count of ordered no-unary shapes via the composition DP."""
    s = [0] * (n + 1)
    s[1] = 1
    for m in range(2, n + 1):
        # conv[k][j] = number of forests of k shapes with j leaves total
        conv = [0] * (m + 1)
        conv[0] = 1  # zero trees, zero leaves
        total = 0
        layer = conv
        for k in range(1, m + 1):
            new = [0] * (m + 1)
            for j in range(k - 1, m):
                if layer[j] == 0:
                    continue
                for extra in range(1, m - j + 1):
                    new[j + extra] += layer[j] * s[extra]
            if k >= 2:
                total += new[m]
            layer = new
        s[m] = total
    return s[n]


def enumerate_trees(alpha: float, n: int):
    """All ordered no-unary trees with n leaves and their conditional
    probabilities (zero-mass trees included)."""
    if n < 1:
        raise ValueError("n must be positive")
    if n > MAX_ENUM_LEAVES:
        raise ResourceLimitError(
            "tree enumeration is capped at %d leaves" % MAX_ENUM_LEAVES
        )
    out = []
    for shape in _shapes(n):
        t = Tree.from_shape(shape)
        logp = tree_log_prob_given_leaves(alpha, t)
        out.append((t, math.exp(logp) if logp > float("-inf") else 0.0))
    return out


def tree_law_table(alpha: float, n: int) -> DistTable:
    return DistTable({t.shape_key(): p for t, p in enumerate_trees(alpha, n)})


# -- exact trajectory law of the node-cut chain --------------------------------


def _cut_structure(tree: Tree):
    """Per internal node: weight, preorder range, leaf positions beneath."""
    internals = []
    for u in tree.internal_nodes():
        end = u + tree.subtree_sizes[u]
        leaves_below = tuple(
            p for p in tree.leaves() if u <= p < end
        )
        internals.append((u, tree.child_counts[u] - 1, end, leaves_below))
    return internals


def exact_prune_chain_law(alpha: float, n: int) -> DistTable:
    """Exact law of the partition trajectory of the node-cut chain.

    Sums over all trees with n leaves, all n! leaf labelings and all cut
    orders, each weighted by the product of (k_u - 1)/(L - 1) factors.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if n > MAX_TRAJECTORY_N:
        raise ResourceLimitError(
            "exact trajectory law is capped at n = %d" % MAX_TRAJECTORY_N
        )
    acc = {}
    initial = partition_key([(i,) for i in range(1, n + 1)])
    if n == 1:
        return DistTable({initial: 1.0})
    inv_fact = 1.0 / math.factorial(n)
    for tree, p_tree in enumerate_trees(alpha, n):
        if p_tree == 0.0:
            continue
        internals = _cut_structure(tree)
        info = {u: (w, end, lvs) for u, w, end, lvs in internals}
        leafpos = tree.leaves()
        for perm in itertools.permutations(range(1, n + 1)):
            label = dict(zip(leafpos, perm))

            def walk(alive, cut_max, weight_left, prob, traj):
                # alive: internal nodes still cuttable; cut_max: maximal cut
                # antichain; weight_left = current leaf count - 1
                for u in alive:
                    w_u, end_u, lvs_u = info[u]
                    p_next = prob * w_u / weight_left
                    inside = [c for c in cut_max if u <= c < end_u]
                    outside = [c for c in cut_max if not u <= c < end_u]
                    covered = set()
                    for c in inside:
                        covered.update(info[c][2])
                    merged = len(inside) + sum(
                        1 for p in lvs_u if p not in covered
                    )
                    new_max = outside + [u]
                    occupied = set()
                    blocks = []
                    for c in new_max:
                        blk = tuple(sorted(label[p] for p in info[c][2]))
                        blocks.append(blk)
                        occupied.update(info[c][2])
                    blocks.extend(
                        (label[p],) for p in leafpos if p not in occupied
                    )
                    key = partition_key(blocks)
                    new_traj = traj + "|" + key
                    new_alive = [
                        v for v in alive if v != u and not u <= v < end_u
                    ]
                    if not new_alive:
                        acc[new_traj] = acc.get(new_traj, 0.0) + p_next
                    else:
                        walk(
                            new_alive,
                            new_max,
                            weight_left - (merged - 1),
                            p_next,
                            new_traj,
                        )

            walk([u for u, _, _, _ in internals], [], n - 1, p_tree * inv_fact,
                 initial)
    return DistTable(acc)


def exact_first_event_law(alpha: float, n: int) -> DistTable:
    """Marginal law of the partition right after the first cut."""
    law = exact_prune_chain_law(alpha, n)
    acc = {}
    for traj, p in law.items():
        key = traj.split("|")[1]
        acc[key] = acc.get(key, 0.0) + p
    return DistTable(acc)


def rate_induced_first_event_law(alpha: float, n: int) -> DistTable:
    """First-event law implied by the closed-form merge probabilities."""
    acc = {}
    for k in range(2, n + 1):
        p = merge_ratio(alpha, n, k)
        for subset in itertools.combinations(range(1, n + 1), k):
            blocks = [subset] + [(i,) for i in range(1, n + 1) if i not in subset]
            acc[partition_key(blocks)] = p
    return DistTable(acc)


# -- exact trajectory law of the multiple-merger jump chain ---------------------


def exact_beta_chain_law(alpha: float, n: int) -> DistTable:
    if n < 1:
        raise ValueError("n must be positive")
    if n > MAX_TRAJECTORY_N:
        raise ResourceLimitError(
            "exact trajectory law is capped at n = %d" % MAX_TRAJECTORY_N
        )
    acc = {}
    start = tuple((i,) for i in range(1, n + 1))

    def walk(blocks, prob, traj):
        b = len(blocks)
        if b == 1:
            acc[traj] = acc.get(traj, 0.0) + prob
            return
        for k in range(2, b + 1):
            p_set = merge_ratio(alpha, b, k)
            for chosen in itertools.combinations(range(b), k):
                chosen_set = set(chosen)
                new = tuple(sorted(x for i in chosen for x in blocks[i]))
                rest = [blocks[i] for i in range(b) if i not in chosen_set]
                nxt = tuple(sorted(rest + [new], key=lambda blk: blk[0]))
                walk(nxt, prob * p_set, traj + "|" + partition_key(nxt))

    walk(start, 1.0, partition_key(start))
    return DistTable(acc)


# -- law of the tree remaining after the first cut ------------------------------


def exact_post_first_event_tree_law(alpha: float, n: int, k: int) -> DistTable:
    """Conditional law of the cut tree's shape given it has k leaves; must
    coincide with the k-leaf tree law."""
    if not 2 <= k <= n:
        raise ValueError("need 2 <= k <= n")
    if n > MAX_POST_EVENT_N:
        raise ResourceLimitError(
            "post-event law is capped at n = %d" % MAX_POST_EVENT_N
        )
    acc = {}
    mass = 0.0
    for tree, p_tree in enumerate_trees(alpha, n):
        if p_tree == 0.0:
            continue
        for u in tree.internal_nodes():
            p_first = (tree.child_counts[u] - 1) / (n - 1)
            end = u + tree.subtree_sizes[u]
            counts = [
                0 if i == u else tree.child_counts[i]
                for i in range(tree.n_nodes)
                if not u < i < end
            ]
            cut = Tree.from_child_counts(counts)
            if cut.leaf_count() != k:
                continue
            key = cut.shape_key()
            acc[key] = acc.get(key, 0.0) + p_tree * p_first
            mass += p_tree * p_first
    if mass == 0.0:
        raise ValueError("event L = %d has zero probability" % k)
    return DistTable({key: v / mass for key, v in acc.items()})


# -- exact verification suites ---------------------------------------------------


@dataclass(frozen=True)
class VerifyRow:
    suite: str
    label: str
    value: float
    tol: float
    passed: bool


def verify_theorem_equality(alphas=(0.5, 0.6, 2.0 / 3.0, 0.8, 0.9), nmax=5,
                            tol=1e-10):
    """TV distance between the two exact trajectory laws."""
    rows = []
    for alpha in alphas:
        for n in range(2, nmax + 1):
            tv = tv_distance(
                exact_prune_chain_law(alpha, n), exact_beta_chain_law(alpha, n)
            )
            rows.append(
                VerifyRow(
                    "theorem1",
                    "alpha=%.6f n=%d" % (alpha, n),
                    tv,
                    tol,
                    tv < tol,
                )
            )
    return rows


def verify_rates(alphas=(0.5, 0.6, 2.0 / 3.0, 0.8, 0.9), nmax=5, nsum=200,
                 tol=1e-12):
    """Closed-form event-size law: checksum to 1 and exact first-event match."""
    from .coalescent import merge_ratio_checksum

    rows = []
    for alpha in alphas:
        dev = max(abs(merge_ratio_checksum(alpha, n) - 1.0) for n in range(2, nsum + 1))
        rows.append(
            VerifyRow("rates", "checksum alpha=%.6f n<=%d" % (alpha, nsum), dev,
                      tol, dev < tol)
        )
        for n in range(2, nmax + 1):
            tv = tv_distance(
                exact_first_event_law(alpha, n),
                rate_induced_first_event_law(alpha, n),
            )
            rows.append(
                VerifyRow("rates", "first-event alpha=%.6f n=%d" % (alpha, n),
                          tv, tol, tv < tol)
            )
    return rows


def verify_post_event_law(alphas=(0.5, 0.6, 2.0 / 3.0, 0.8, 0.9), nmax=6,
                          tol=1e-12):
    rows = []
    for alpha in alphas:
        worst = 0.0
        for n in range(2, nmax + 1):
            for k in range(2, n):
                try:
                    dist = exact_post_first_event_tree_law(alpha, n, k)
                except ValueError:
                    continue
                worst = max(worst, tv_distance(dist, tree_law_table(alpha, k)))
        rows.append(
            VerifyRow("pk", "alpha=%.6f n<=%d" % (alpha, nmax), worst, tol,
                      worst < tol)
        )
    return rows


def verify_root_degree_mean(alphas=(0.5, 0.6, 2.0 / 3.0, 0.9), nmax=7,
                            tol=1e-12):
    rows = []
    for alpha in alphas:
        worst = 0.0
        for n in range(2, nmax + 1):
            emp = sum(
                (t.child_counts[0] - 1) * p for t, p in enumerate_trees(alpha, n)
            )
            worst = max(worst, abs(emp - mean_root_excess(alpha, n)))
        rows.append(
            VerifyRow("k0", "alpha=%.6f n<=%d" % (alpha, nmax), worst, tol,
                      worst < tol)
        )
    return rows
