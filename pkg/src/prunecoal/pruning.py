"""The node-cut coalescent on a labeled tree.

Cutting an internal node kills its strict descendants and leaves the node
behind as a leaf carrying the merged label block.  Nodes are selected with
probability (k_u - 1) / (L - 1) via integer Fenwick weights, so the selection
probabilities are exact rationals.  The mark-replay variant draws every
internal node a cut time up front and replays them in increasing order.
"""

from __future__ import annotations

from dataclasses import dataclass

from .trees import Partition, Tree


def mark_from_uniform(k: int, u: float) -> float:
    """Cut time with survival (1+t)^(1-k) by inverse transform, u in (0, 1]."""
    if k < 2:
        raise ValueError("marks exist only on nodes with at least 2 children")
    if not 0.0 < u <= 1.0:
        raise ValueError("u must lie in (0, 1]")
    return u ** (-1.0 / (k - 1)) - 1.0


def sample_mark(k: int, rng) -> float:
    return mark_from_uniform(k, 1.0 - rng.random())


class Fenwick:
    """Binary indexed tree over non-negative integer weights."""

    def __init__(self, weights):
        weights = list(weights)
        self.n = len(weights)
        self.tree = [0] * (self.n + 1)
        self.total = 0
        for i, w in enumerate(weights):
            if w:
                self.add(i, w)

    def add(self, i: int, delta: int):
        self.total += delta
        i += 1
        while i <= self.n:
            self.tree[i] += delta
            i += i & -i

    def find(self, t: int) -> int:
        """Smallest index i with cumulative weight through i exceeding t."""
        pos = 0
        mask = 1 << (self.n.bit_length())
        while mask:
            nxt = pos + mask
            if nxt <= self.n and self.tree[nxt] <= t:
                t -= self.tree[nxt]
                pos = nxt
            mask >>= 1
        return pos


@dataclass(frozen=True)
class ChainEvent:
    step: int
    cut_node: int
    merged: tuple  # blocks (tuples of labels) that coalesced, sorted by min
    partition: Partition


@dataclass(frozen=True)
class ChainTrace:
    n: int
    initial: Partition
    events: tuple

    @property
    def z(self) -> int:
        return len(self.events)

    @property
    def b(self) -> int:
        """Blocks merged in the final event (1 when there is no event)."""
        return len(self.events[-1].merged) if self.events else 1

    @property
    def first_event_size(self):
        return len(self.events[0].merged) if self.events else None

    @property
    def terminal(self) -> bool:
        part = self.events[-1].partition if self.events else self.initial
        return part.is_trivial()

    def trajectory_key(self) -> str:
        keys = [self.initial.key()]
        keys.extend(e.partition.key() for e in self.events)
        return "|".join(keys)


@dataclass(frozen=True)
class ChainStats:
    """Summary of one chain run without the partition trajectory."""

    n: int
    z: int
    b: int
    first_event_size: int | None
    largest_block_fraction: float | None


class PruneState:
    """Mutable run-state of one chain; the tree itself is never modified.

    track='labels' keeps label blocks per live leaf (for traces);
    track='sizes' keeps only block sizes (for statistics).
    """

    def __init__(self, tree: Tree, track: str = "labels"):
        if track not in ("labels", "sizes"):
            raise ValueError("track must be 'labels' or 'sizes'")
        if track == "labels" and tree.labels is None:
            raise ValueError("tracking label blocks requires a labeled tree")
        if not tree.is_gw_valid():
            raise ValueError("tree has a node with exactly one child")
        self.tree = tree
        self.track = track
        n = tree.n_nodes
        counts = tree.child_counts
        self.alive = [True] * n
        self.leaf_now = [c == 0 for c in counts]
        self.fen = Fenwick(c - 1 if c > 0 else 0 for c in counts)
        self.nxt = list(range(1, n + 1))  # next-alive candidate past each node
        if track == "labels":
            self.blocks = [
                [tree.labels[i]] if counts[i] == 0 else None for i in range(n)
            ]
        else:
            self.sizes = [1 if counts[i] == 0 else 0 for i in range(n)]
        self.leaf_total = tree.leaf_count()
        self.ground_n = self.leaf_total

    def total_weight(self) -> int:
        return self.fen.total

    def _next_alive(self, i: int) -> int:
        n = self.tree.n_nodes
        path = []
        while i < n and not self.alive[i]:
            path.append(i)
            i = self.nxt[i]
        for p in path:
            self.nxt[p] = i
        return i

    def assert_weight_invariant(self):
        assert self.fen.total == self.leaf_total - 1, (
            "selection weights must total L-1: %d != %d"
            % (self.fen.total, self.leaf_total - 1)
        )

    def can_cut(self, u: int) -> bool:
        return self.alive[u] and not self.leaf_now[u]

    def cut(self, u: int):
        """Cut node u; returns the merged blocks (label tuples) or sizes."""
        if not self.can_cut(u):
            raise ValueError("node %d is not an alive internal node" % u)
        tree = self.tree
        end = u + tree.subtree_sizes[u]
        merged_blocks = [] if self.track == "labels" else None
        merged_sizes = [] if self.track == "sizes" else None
        j = self._next_alive(u + 1)
        while j < end:
            if self.leaf_now[j]:
                if self.track == "labels":
                    merged_blocks.append(self.blocks[j])
                    self.blocks[j] = None
                else:
                    merged_sizes.append(self.sizes[j])
            else:
                self.fen.add(j, -(tree.child_counts[j] - 1))
            self.alive[j] = False
            j = self._next_alive(j + 1)
        self.fen.add(u, -(tree.child_counts[u] - 1))
        self.leaf_now[u] = True
        if self.track == "labels":
            out = tuple(
                sorted((tuple(sorted(b)) for b in merged_blocks), key=lambda b: b[0])
            )
            # small-to-large: extend the largest constituent in place
            big = max(merged_blocks, key=len)
            for b in merged_blocks:
                if b is not big:
                    big.extend(b)
            self.blocks[u] = big
            self.leaf_total -= len(merged_blocks) - 1
            return out
        self.sizes[u] = sum(merged_sizes)
        self.leaf_total -= len(merged_sizes) - 1
        return merged_sizes

    def partition(self) -> Partition:
        if self.track != "labels":
            raise ValueError("partitions need label tracking")
        n = self.tree.n_nodes
        blocks = []
        j = self._next_alive(0)
        while j < n:
            if self.leaf_now[j]:
                blocks.append(tuple(self.blocks[j]))
            j = self._next_alive(j + 1)
        return Partition(blocks, self.ground_n)


def live_tree(state: PruneState) -> Tree:
    """Shape of the current live structure; cut nodes appear as leaves."""
    counts = []
    n = state.tree.n_nodes
    j = state._next_alive(0)
    while j < n:
        counts.append(0 if state.leaf_now[j] else state.tree.child_counts[j])
        j = state._next_alive(j + 1)
    return Tree.from_child_counts(counts)


def _run_chain(state: PruneState, pick_node, check: bool):
    tree = state.tree
    n = state.leaf_total
    events = []
    step = 0
    first_size = None
    last_sizes = None
    while state.total_weight() > 0:
        if check:
            state.assert_weight_invariant()
        u = pick_node(state)
        merged = state.cut(u)
        step += 1
        if state.track == "labels":
            events.append(ChainEvent(step, u, merged, state.partition()))
        else:
            if first_size is None:
                first_size = len(merged)
            last_sizes = merged
    if state.track == "labels":
        return ChainTrace(n=n, initial=Partition.singletons(n), events=tuple(events))
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


def _weighted_pick(rng):
    def pick(state):
        t = int(rng.integers(0, state.total_weight()))
        return state.fen.find(t)

    return pick


def prune_chain(tree: Tree, rng, check: bool = False) -> ChainTrace:
    """Full chain with partitions; selects cut nodes by their weights."""
    state = PruneState(tree, track="labels")
    return _run_chain(state, _weighted_pick(rng), check)


def prune_chain_stats(tree: Tree, rng, check: bool = False) -> ChainStats:
    """Label-free chain run; the tree may be unlabeled."""
    state = PruneState(tree, track="sizes")
    return _run_chain(state, _weighted_pick(rng), check)


def _marks_order(tree: Tree, rng):
    marks = []
    for u, k in enumerate(tree.child_counts):
        if k >= 2:
            marks.append((sample_mark(k, rng), u))
    marks.sort()  # ties (fp-possible) break on the lower node id
    return [u for _, u in marks]


def _replay(state: PruneState, order, check: bool):
    it = iter(order)

    def pick(state):
        for u in it:
            if state.can_cut(u):
                return u
        raise AssertionError("mark replay exhausted before the chain finished")

    return _run_chain(state, pick, check)


def prune_chain_by_marks(tree: Tree, rng, check: bool = False) -> ChainTrace:
    """Chain obtained by replaying per-node cut times in increasing order,
    skipping nodes that are already dead; same law as prune_chain."""
    state = PruneState(tree, track="labels")
    return _replay(state, _marks_order(tree, rng), check)


def prune_chain_by_marks_stats(tree: Tree, rng, check: bool = False) -> ChainStats:
    state = PruneState(tree, track="sizes")
    return _replay(state, _marks_order(tree, rng), check)
