"""Rooted ordered trees stored as flat preorder arenas, plus set partitions.

Trees are immutable after construction; anything that mutates (the node-cut
chain) keeps its own run-state and never touches the tree.  Node ``i``'s
subtree occupies the contiguous preorder range ``[i, i + subtree_sizes[i])``,
which is what the cutting code relies on.
"""

from __future__ import annotations

import json
from dataclasses import dataclass


@dataclass(frozen=True)
class Tree:
    """Ordered rooted tree with child counts in preorder.

    ``child_counts[i]`` is the offspring number of node ``i``, ``parents[i]``
    the preorder index of its parent (-1 for the root) and
    ``subtree_sizes[i]`` the node count of the subtree rooted at ``i``.
    ``labels``, when present, holds a leaf label in 1..L at every leaf
    position and 0 at internal positions.
    """

    child_counts: tuple
    parents: tuple
    subtree_sizes: tuple
    labels: tuple | None = None

    @staticmethod
    def from_child_counts(counts, leaf_labels=None) -> "Tree":
        """Build a tree from a preorder child-count sequence.

        The sequence must describe exactly one tree: the walk
        ``sum(c - 1)`` over a prefix stays >= 0 and hits -1 only at the end.
        """
        counts = tuple(int(c) for c in counts)
        if not counts:
            raise ValueError("empty child-count sequence")
        n = len(counts)
        parents = [-1] * n
        stack = []  # [node, unfilled child slots]
        for i, c in enumerate(counts):
            if i > 0:
                if not stack:
                    raise ValueError("child-count sequence closes before node %d" % i)
                top = stack[-1]
                parents[i] = top[0]
                top[1] -= 1
                if top[1] == 0:
                    stack.pop()
            if c > 0:
                stack.append([i, c])
        if stack:
            raise ValueError("child-count sequence leaves unfilled child slots")
        sizes = [1] * n
        for i in range(n - 1, 0, -1):
            sizes[parents[i]] += sizes[i]
        labels = None
        if leaf_labels is not None:
            leaf_labels = list(leaf_labels)
            full = [0] * n
            pos = 0
            for i, c in enumerate(counts):
                if c == 0:
                    if pos >= len(leaf_labels):
                        raise ValueError("fewer labels than leaves")
                    full[i] = int(leaf_labels[pos])
                    pos += 1
            if pos != len(leaf_labels):
                raise ValueError("more labels than leaves")
            if sorted(full[i] for i in range(n) if counts[i] == 0) != list(
                range(1, pos + 1)
            ):
                raise ValueError("labels must be a bijection with 1..L")
            labels = tuple(full)
        return Tree(counts, tuple(parents), tuple(sizes), labels)

    @staticmethod
    def from_shape(shape, leaf_labels=None) -> "Tree":
        """Build from nested tuples: a leaf is ``()``, an internal node a
        tuple of child shapes."""
        counts = []
        stack = [shape]
        while stack:
            node = stack.pop()
            counts.append(len(node))
            stack.extend(reversed(node))
        return Tree.from_child_counts(counts, leaf_labels)

    def to_shape(self):
        def build(i):
            if self.child_counts[i] == 0:
                return ()
            kids = []
            j = i + 1
            for _ in range(self.child_counts[i]):
                kids.append(build(j))
                j += self.subtree_sizes[j]
            return tuple(kids)

        return build(0)

    def shape_key(self) -> str:
        """Canonical string for the unlabeled shape: leaf ``*``, internal
        ``(`` children ``)``."""
        out = []
        stack = [0]
        while stack:
            i = stack.pop()
            if i < 0:
                out.append(")")
                continue
            k = self.child_counts[i]
            if k == 0:
                out.append("*")
                continue
            out.append("(")
            stack.append(-1)
            kids = list(self.children(i))
            stack.extend(reversed(kids))
        return "".join(out)

    # -- basic queries ----------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return len(self.child_counts)

    def leaf_count(self) -> int:
        return sum(1 for c in self.child_counts if c == 0)

    def leaves(self):
        return tuple(i for i, c in enumerate(self.child_counts) if c == 0)

    def internal_nodes(self):
        return tuple(i for i, c in enumerate(self.child_counts) if c > 0)

    def children(self, i):
        j = i + 1
        for _ in range(self.child_counts[i]):
            yield j
            j += self.subtree_sizes[j]

    def depths(self):
        d = [0] * self.n_nodes
        for i in range(1, self.n_nodes):
            d[i] = d[self.parents[i]] + 1
        return tuple(d)

    def height(self) -> int:
        return max(self.depths())

    def is_gw_valid(self) -> bool:
        """No node with exactly one child."""
        return all(c != 1 for c in self.child_counts)

    def leaves_nodes_identity(self) -> bool:
        """L(t) - 1 == sum of (k_v - 1) over internal nodes."""
        return self.leaf_count() - 1 == sum(
            c - 1 for c in self.child_counts if c > 0
        )

    def label_of(self, node) -> int:
        if self.labels is None:
            raise ValueError("tree is unlabeled")
        lab = self.labels[node]
        if lab == 0:
            raise ValueError("node %d is not a labeled leaf" % node)
        return lab

    def with_labels(self, leaf_labels) -> "Tree":
        return Tree.from_child_counts(self.child_counts, leaf_labels)

    def with_random_labels(self, rng) -> "Tree":
        perm = rng.permutation(self.leaf_count()) + 1
        return self.with_labels(int(x) for x in perm)


def graft(t1: Tree, u: int, t2: Tree) -> Tree:
    """Identify the root of ``t2`` with the leaf ``u`` of ``t1``.

    Labels are dropped; leaf count of the result is L(t1) + L(t2) - 1.
    """
    if not 0 <= u < t1.n_nodes or t1.child_counts[u] != 0:
        raise ValueError("graft point must be a leaf of the host tree")
    counts = t1.child_counts[:u] + t2.child_counts + t1.child_counts[u + 1 :]
    return Tree.from_child_counts(counts)


def truncate(t: Tree, h: int) -> Tree:
    """Restrict to nodes of depth <= h; depth-h nodes become leaves."""
    if h < 0:
        raise ValueError("height must be non-negative")
    depths = t.depths()
    counts = [
        0 if depths[i] == h else t.child_counts[i]
        for i in range(t.n_nodes)
        if depths[i] <= h
    ]
    return Tree.from_child_counts(counts)


# -- serialization ---------------------------------------------------------


def tree_to_obj(t: Tree):
    """Nested-array representation: leaves ``{"label": k}`` (``null`` when
    unlabeled), internal nodes ``{"children": [...]}``."""

    def build(i):
        if t.child_counts[i] == 0:
            lab = None if t.labels is None else t.labels[i]
            return {"label": lab}
        return {"children": [build(j) for j in t.children(i)]}

    return build(0)


def tree_to_json(t: Tree) -> str:
    """Byte-stable JSON; field order fixed by construction."""
    return json.dumps(tree_to_obj(t), separators=(",", ":"))


def tree_from_obj(obj) -> Tree:
    counts = []
    labels = []
    has_labels = True

    def walk(node):
        nonlocal has_labels
        if "children" in node:
            counts.append(len(node["children"]))
            for c in node["children"]:
                walk(c)
        else:
            counts.append(0)
            if node.get("label") is None:
                has_labels = False
            else:
                labels.append(node["label"])

    walk(obj)
    return Tree.from_child_counts(counts, labels if has_labels else None)


def tree_from_json(s: str) -> Tree:
    return tree_from_obj(json.loads(s))


# -- partitions ------------------------------------------------------------


def partition_key(blocks) -> str:
    """Canonical string for a collection of integer blocks: blocks sorted by
    least element, elements comma-separated, blocks semicolon-separated."""
    canon = sorted((tuple(sorted(b)) for b in blocks), key=lambda b: b[0])
    return ";".join(",".join(str(x) for x in b) for b in canon)


class Partition:
    """Set partition of {1..n}; blocks ordered by their smallest element."""

    __slots__ = ("blocks", "n")

    def __init__(self, blocks, n: int):
        tidy = [tuple(sorted(b)) for b in blocks]
        if any(not b for b in tidy):
            raise ValueError("empty block")
        canon = sorted(tidy, key=lambda b: b[0])
        seen = set()
        for b in canon:
            for x in b:
                if not 1 <= x <= n or x in seen:
                    raise ValueError("blocks must partition 1..%d" % n)
                seen.add(x)
        if len(seen) != n:
            raise ValueError("blocks must cover 1..%d" % n)
        self.blocks = tuple(canon)
        self.n = n

    @staticmethod
    def singletons(n: int) -> "Partition":
        return Partition([(i,) for i in range(1, n + 1)], n)

    def is_trivial(self) -> bool:
        return len(self.blocks) == 1

    def block_count(self) -> int:
        return len(self.blocks)

    def key(self) -> str:
        return partition_key(self.blocks)

    def merge(self, indices) -> "Partition":
        """New partition with the blocks at the given positions merged."""
        idx = set(indices)
        if len(idx) < 2:
            raise ValueError("a merge involves at least two blocks")
        merged = []
        rest = []
        for i, b in enumerate(self.blocks):
            (merged if i in idx else rest).append(b)
        new = tuple(sorted(x for b in merged for x in b))
        return Partition(rest + [new], self.n)

    def __eq__(self, other):
        return (
            isinstance(other, Partition)
            and self.n == other.n
            and self.blocks == other.blocks
        )

    def __hash__(self):
        return hash((self.n, self.blocks))

    def __repr__(self):
        return "Partition(%s)" % (self.key(),)
