import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import chi2_contingency

from rdcp.canonical import LEAF
from rdcp.degree_dist import point_mass
from rdcp.host_graph import complete, from_edges, parse_host
from rdcp.ode import solve_lambda
from rdcp.simulate import (
    RdcpState,
    SimulationError,
    UntilFinal,
    UntilSteps,
    UntilTime,
    assign_constraints,
    component_stats,
    final_graph_is_maximal,
    simulate,
    simulate_discrete_rejection,
)


def rng(seed=0):
    return np.random.default_rng(seed)


def test_triangle_saturates():
    st_ = simulate(complete(3), [2, 2, 2], UntilFinal(), rng())
    assert st_.edge_set() == {(0, 1), (0, 2), (1, 2)}
    assert np.all(np.isfinite(st_.sat_time)) and st_.final


def test_constraints_assigned_iid():
    assert list(assign_constraints(complete(5), point_mass(2), rng())) == [2] * 5


def test_component_stats_arithmetic():
    s = RdcpState.empty([2] * 10)
    assert tuple(component_stats(s)) == (1, 1.0, 10)
    s.add_edge(0, 1, 0.5)
    assert component_stats(s).susceptibility == pytest.approx(1.2)
    assert component_stats(s).count == 9


def test_neighborhoods_on_triangle():
    s = simulate(complete(3), [2, 2, 2], UntilFinal(), rng())
    assert s.neighborhood(0, 0) == LEAF
    assert s.neighborhood(1, 1) == b"(()())"
    assert s.neighborhood(2, 2).startswith(b"G")
    assert RdcpState.empty([2] * 4).neighborhood(3, 2) == LEAF


def test_rejects_negative_stops():
    with pytest.raises(ValueError):
        simulate(complete(4), [2] * 4, UntilTime(-1.0), rng())
    with pytest.raises(ValueError):
        simulate(complete(4), [2] * 4, UntilSteps(-1), rng())


def test_final_on_implicit_union_refused():
    host = parse_host("union:complete:3000:complete:3000")
    with pytest.raises(SimulationError):
        simulate(host, [2] * 6000, UntilFinal(), rng())


@st.composite
def small_instance(draw):
    n = draw(st.integers(2, 9))
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    edges = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs)))
    cons = draw(st.lists(st.integers(2, 4), min_size=n, max_size=n))
    seed = draw(st.integers(0, 2**31))
    return from_edges(n, edges, r_n=1.0), cons, seed


@given(small_instance())
@settings(max_examples=150, deadline=None)
def test_final_graph_respects_constraints_and_is_maximal(inst):
    host, cons, seed = inst
    s = simulate(host, cons, UntilFinal(), rng(seed))
    assert all(d <= c for d, c in zip(s.degrees, cons))
    assert final_graph_is_maximal(host, s)
    assert s.steps == len(s.edges_added)
    assert all(np.isfinite(s.sat_time[v]) == (s.degrees[v] == cons[v]) for v in range(host.n_vertices))


@pytest.mark.parametrize("host", [complete(30), complete(3000)])
def test_discrete_and_continuous_coincide(host):
    cons = [3] * host.n_vertices
    a = simulate(host, cons, UntilSteps(25), rng(5))
    b = simulate(host, cons, UntilTime(a.clock), rng(5))
    assert a.edge_set() == b.edge_set()


def _first_edges(host, k, runs, seed):
    g = rng(seed)
    out = Counter()
    for _ in range(runs):
        s = simulate(host, [2] * host.n_vertices, UntilSteps(k), g)
        out[tuple((min(u, v), max(u, v)) for u, v, _ in s.edges_added)] += 1
    return out


def _chi2_p(a: Counter, b: Counter) -> float:
    keys = sorted(set(a) | set(b))
    table = np.array([[a[k] for k in keys], [b[k] for k in keys]])
    return chi2_contingency(table)[1]


def test_lazy_sampler_matches_materialized():
    lazy = complete(5, materialize=False)
    dense = complete(5, materialize=True)
    a = _first_edges(lazy, 3, 20_000, 1)
    b = _first_edges(dense, 3, 20_000, 2)
    assert _chi2_p(a, b) > 1e-3


def test_rejection_oracle_matches_clock_process():
    host = complete(5)
    g = rng(7)
    a, b = Counter(), Counter()
    for _ in range(20_000):
        a[frozenset(simulate(host, [2] * 5, UntilSteps(3), g).edge_set())] += 1
        b[frozenset(simulate_discrete_rejection(host, [2] * 5, 3, g).edge_set())] += 1
    assert _chi2_p(a, b) > 1e-3


def test_matches_limit_at_moderate_n():
    sol = solve_lambda(point_mass(3), 1e-10)
    host = complete(5000)
    g = rng(4)
    s = simulate(host, assign_constraints(host, point_mass(3), g), UntilTime(0.75), g)
    assert abs(s.unsaturated_fraction() - float(sol.lam_prime(0.75))) < 0.02
    assert abs(s.steps / 5000 - float(sol.big_F(0.75)) / 2) < 0.02


def test_d2_on_k100_saturates_almost_everyone():
    s = simulate(complete(100), [2] * 100, UntilFinal(), rng(7))
    assert s.final and s.unsaturated_fraction() <= 0.02


def test_snapshots_record_each_time_once():
    s = simulate(complete(200), [3] * 200, UntilTime(1.0), rng(2), snapshot_times=[0.25, 0.5, 2.0])
    assert [r["t"] for r in s.snapshots] == [0.25, 0.5]
    assert s.snapshots[0]["edges"] <= s.snapshots[1]["edges"] <= s.steps
    f = simulate(complete(20), [2] * 20, UntilFinal(), rng(2), snapshot_times=[1e9])
    assert f.snapshots[0]["edges"] == f.steps


def test_lazy_final_matches_maximality():
    host = complete(2500)
    s = simulate(host, [2] * 2500, UntilFinal(), rng(3))
    unsat = [v for v in range(2500) if s.degrees[v] < 2]
    assert len(unsat) <= 1 or all(v in s.adjacency[u] for u in unsat for v in unsat if u != v)
