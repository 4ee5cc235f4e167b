import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prunecoal.trees import (
    Partition,
    Tree,
    graft,
    partition_key,
    tree_from_json,
    tree_to_json,
    truncate,
)

shapes = st.recursive(
    st.just(()),
    lambda ch: st.lists(ch, min_size=2, max_size=4).map(tuple),
    max_leaves=25,
)


def test_from_child_counts_rejects_bad_walks():
    with pytest.raises(ValueError):
        Tree.from_child_counts([])
    with pytest.raises(ValueError):
        Tree.from_child_counts([0, 0])  # closes before node 1
    with pytest.raises(ValueError):
        Tree.from_child_counts([2, 0])  # unfilled slot


def test_preorder_structure():
    # root with (cherry, leaf)
    t = Tree.from_shape((((), ()), ()))
    assert t.child_counts == (2, 2, 0, 0, 0)
    assert t.parents == (-1, 0, 1, 1, 0)
    assert t.subtree_sizes == (5, 3, 1, 1, 1)
    assert t.leaf_count() == 3
    assert list(t.children(0)) == [1, 4]
    assert t.depths() == (0, 1, 2, 2, 1)


@given(shapes)
def test_leaves_nodes_identity(shape):
    t = Tree.from_shape(shape)
    assert t.leaves_nodes_identity()
    assert t.to_shape() == shape


def test_graft_identity():
    single = Tree.from_shape(())
    t = Tree.from_shape(((), (), ()))
    assert graft(single, 0, t) == t


def test_graft_cherry_on_cherry():
    cherry = Tree.from_shape(((), ()))
    g = graft(cherry, 1, cherry)
    assert g.leaf_count() == 3
    assert len(g.internal_nodes()) == 2


@given(shapes, shapes, st.randoms(use_true_random=False))
def test_graft_leaf_count(s1, s2, rnd):
    t1, t2 = Tree.from_shape(s1), Tree.from_shape(s2)
    u = rnd.choice(t1.leaves())
    g = graft(t1, u, t2)
    # independent recount straight off the child-count sequence
    assert sum(1 for c in g.child_counts if c == 0) == (
        t1.leaf_count() + t2.leaf_count() - 1
    )


def test_graft_rejects_internal_node():
    t = Tree.from_shape((((), ()), ()))
    with pytest.raises(ValueError):
        graft(t, 1, t)


def test_truncate_trivials():
    t = Tree.from_shape(((((), ()), ((), ())), (((), ()), ((), ()))))
    assert truncate(t, 0).n_nodes == 1
    assert truncate(t, t.height()) == t
    assert truncate(t, 1) == Tree.from_shape(((), ()))
    with pytest.raises(ValueError):
        truncate(t, -1)


@given(shapes, st.integers(0, 6))
def test_truncate_idempotent(shape, h):
    t = Tree.from_shape(shape)
    once = truncate(t, h)
    assert truncate(once, h) == once


def test_graft_then_cut_recovers_host():
    from prunecoal.pruning import PruneState, live_tree

    t1 = Tree.from_shape((((), ()), ()))
    t2 = Tree.from_shape(((), (), ()))
    u = 2  # a leaf of t1
    g = graft(t1, u, t2)
    state = PruneState(g, track="sizes")
    state.cut(u)
    assert live_tree(state) == t1


def test_labels():
    t = Tree.from_shape((((), ()), ()), leaf_labels=[2, 3, 1])
    assert t.labels == (0, 0, 2, 3, 1)
    assert t.label_of(4) == 1
    with pytest.raises(ValueError):
        t.label_of(0)
    with pytest.raises(ValueError):
        Tree.from_shape(((), ()), leaf_labels=[1, 3])
    with pytest.raises(ValueError):
        Tree.from_shape(((), ()), leaf_labels=[1])


def test_json_byte_stable():
    t = Tree.from_shape((((), ()), ()), leaf_labels=[1, 2, 3])
    s = tree_to_json(t)
    assert s == (
        '{"children":[{"children":[{"label":1},{"label":2}]},{"label":3}]}'
    )
    assert tree_from_json(s) == t
    bare = Tree.from_shape(((), ()))
    assert tree_to_json(bare) == '{"children":[{"label":null},{"label":null}]}'
    assert tree_from_json(tree_to_json(bare)) == bare


@given(shapes)
def test_json_roundtrip(shape):
    t = Tree.from_shape(shape)
    assert tree_from_json(tree_to_json(t)) == t


def test_partition_canonical():
    p = Partition([(3, 1), (2,)], 3)
    assert p.blocks == ((1, 3), (2,))
    assert p.key() == "1,3;2"
    assert partition_key([[2], [3, 1]]) == "1,3;2"
    assert Partition.singletons(3).key() == "1;2;3"
    assert p == Partition([(2,), (1, 3)], 3)
    assert hash(p) == hash(Partition([(1, 3), (2,)], 3))


def test_partition_validation():
    with pytest.raises(ValueError):
        Partition([(1,), (1, 2)], 2)  # overlap
    with pytest.raises(ValueError):
        Partition([(1,)], 2)  # not covering
    with pytest.raises(ValueError):
        Partition([(1,), (3,)], 2)  # out of range
    with pytest.raises(ValueError):
        Partition([(1,), ()], 1)  # empty block


def test_partition_merge():
    p = Partition.singletons(4)
    q = p.merge([0, 2])
    assert q.key() == "1,3;2;4"
    with pytest.raises(ValueError):
        p.merge([1])
