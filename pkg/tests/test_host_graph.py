import numpy as np
import pytest

from rdcp.host_graph import (
    HostGraphError,
    complete,
    complete_bipartite,
    degree_stats,
    disjoint_union,
    from_edges,
    is_connected,
    parse_host,
    random_regular,
)


def test_small_complete():
    g = complete(5)
    assert g.n_edges == 10 and g.r_n == 4
    assert len(g.edges()) == 10
    assert all(g.has_edge(u, v) for u in range(5) for v in range(5) if u != v)


def test_implicit_complete():
    g = complete(5000)
    assert g.is_implicit
    assert g.n_edges == 5000 * 4999 // 2
    assert len(g.neighbors(17)) == 4999 and 17 not in g.neighbors(17)
    assert g.has_edge(0, 4999) and not g.has_edge(3, 3)
    with pytest.raises(HostGraphError):
        g.edges()


def test_bipartite():
    g = complete_bipartite(4)
    assert g.n_vertices == 8 and g.r_n == 4 and g.n_edges == 16
    assert not g.has_edge(0, 1) and g.has_edge(0, 4)
    assert complete_bipartite(3000).has_edge(0, 3000)


def test_random_regular_is_simple_and_regular():
    rng = np.random.default_rng(1)
    for n, r in [(100, 3), (100, 20), (50, 4)]:
        g = random_regular(n, r, rng)
        assert np.all(g.degrees() == r)
        e = g.edges()
        assert len({tuple(x) for x in e.tolist()}) == len(e) == n * r // 2
        assert np.all(e[:, 0] != e[:, 1])


def test_regular_parity_error():
    with pytest.raises(HostGraphError, match="even"):
        parse_host("regular:5:3")


def test_from_edges_validation():
    with pytest.raises(HostGraphError, match="self-loop"):
        from_edges(3, [(0, 0)])
    with pytest.raises(HostGraphError, match="multi"):
        from_edges(3, [(0, 1), (1, 0)])
    with pytest.raises(HostGraphError, match="range"):
        from_edges(3, [(0, 3)])


def test_union_and_connectivity():
    g = parse_host("union:complete:5:complete:7")
    assert g.n_vertices == 12 and g.n_edges == 10 + 21
    assert not is_connected(g)
    assert is_connected(complete(6))
    u = disjoint_union(complete(3000), complete(3000))
    assert u.is_implicit and not u.has_edge(0, 3000)


def test_degree_stats():
    s = degree_stats(complete(50))
    assert s.min_degree == s.max_degree == 49 and s.outside_fraction == 0 and s.connected


@pytest.mark.parametrize("text", ["", "star:5", "complete:x", "complete:5:extra", "regular:10"])
def test_bad_specs(text):
    with pytest.raises(HostGraphError):
        parse_host(text)
