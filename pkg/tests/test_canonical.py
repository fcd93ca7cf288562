import random

import pytest
from hypothesis import given, settings, strategies as st

from rdcp.canonical import LEAF, canonical_code, census, children_code, tv_distance


def test_single_vertex():
    assert canonical_code(0, []) == LEAF
    assert children_code([[]]) == LEAF


def test_path_and_star_differ():
    path = canonical_code(0, [(0, 1), (1, 2)])
    star = canonical_code(0, [(0, 1), (0, 2)])
    assert path != star
    assert star == b"(()())" and path == b"((()))"


def test_root_matters():
    edges = [(0, 1), (1, 2)]
    assert canonical_code(0, edges) != canonical_code(1, edges)


def _random_tree(n, rnd):
    return [(rnd.randrange(v), v) for v in range(1, n)]


@given(st.integers(1, 15), st.integers(0, 10**6))
@settings(max_examples=200)
def test_tree_code_invariant_under_relabelling(n, seed):
    rnd = random.Random(seed)
    edges = _random_tree(n, rnd)
    perm = list(range(n))
    rnd.shuffle(perm)
    moved = [(perm[u], perm[v]) for u, v in edges]
    rnd.shuffle(moved)
    assert canonical_code(0, edges) == canonical_code(perm[0], moved)


@given(st.integers(3, 8), st.integers(0, 10**6))
@settings(max_examples=150)
def test_graph_code_invariant_under_relabelling(n, seed):
    rnd = random.Random(seed)
    edges = set(_random_tree(n, rnd))
    for _ in range(rnd.randrange(1, 4)):
        u, v = rnd.sample(range(n), 2)
        edges.add((min(u, v), max(u, v)))
    perm = list(range(n))
    rnd.shuffle(perm)
    moved = [(perm[v], perm[u]) for u, v in edges]
    assert canonical_code(0, edges) == canonical_code(perm[0], moved)


def test_non_isomorphic_cyclic_graphs_differ():
    c4 = [(0, 1), (1, 2), (2, 3), (3, 0)]
    tri_pendant = [(0, 1), (1, 2), (2, 0), (2, 3)]
    tri_rooted_at_pendant = [(3, 1), (1, 2), (2, 3), (0, 1)]
    codes = {canonical_code(0, c4), canonical_code(0, tri_pendant), canonical_code(0, tri_rooted_at_pendant)}
    assert len(codes) == 3


def test_children_code_agrees_with_edge_code():
    children = [[1, 2], [3], [], []]
    assert children_code(children) == canonical_code(0, [(0, 1), (0, 2), (1, 3)])


def test_census_and_tv():
    a = census([b"x", b"y", b"y", b"z"])
    assert sum(a.values()) == pytest.approx(1.0)
    assert a[b"y"] == 0.5
    assert tv_distance(a, a) == 0
    assert tv_distance(census([b"p"]), census([b"q"])) == 1
    with pytest.raises(ValueError):
        census([])
