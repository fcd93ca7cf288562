"""Finite-host simulation of the random degree-constrained process.

Every host edge carries an exponential activation clock with mean ``r_n``;
edges are tried in increasing clock order and added iff both endpoints are
still below their constraints.

Materialized hosts draw all clocks up front and sort them (ties, which have
probability zero, are broken by edge index). Implicit hosts draw the
superposed clock stream lazily: arrivals form a Poisson stream of rate
``|E| / r_n`` and each arrival lands on a uniform host pair. A pair whose
endpoints are both unsaturated when it fires is always added, and a pair
touching a saturated vertex can never matter again, so the only repeat
firings that need suppressing are those of pairs already in the graph.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from rdcp.canonical import canonical_code
from rdcp.degree_dist import DegreeDistribution
from rdcp.host_graph import HostGraph

_BATCH = 4096


class SimulationError(RuntimeError):
    pass


class MemoryCapExceeded(SimulationError):
    pass


@dataclass(frozen=True)
class UntilTime:
    t: float


@dataclass(frozen=True)
class UntilSteps:
    k: int


@dataclass(frozen=True)
class UntilFinal:
    pass


class DisjointSets:
    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n
        self.n = n
        self.count = n
        self.largest = 1 if n else 0
        self.sum_sq = n

    def find(self, x: int) -> int:
        root = x
        parent = self.parent
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        sa, sb = self.size[ra], self.size[rb]
        if sa < sb:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] = sa + sb
        self.sum_sq += 2 * sa * sb
        self.count -= 1
        if sa + sb > self.largest:
            self.largest = sa + sb
        return True

    def component_sizes(self) -> np.ndarray:
        roots = [self.find(v) for v in range(self.n)]
        return np.bincount(roots, minlength=self.n)[np.unique(roots)]


class ComponentStats(NamedTuple):
    largest: int
    susceptibility: float
    count: int


@dataclass
class RdcpState:
    constraints: np.ndarray
    degrees: list
    edges_added: list = field(default_factory=list)
    sat_time: np.ndarray = None
    dsu: DisjointSets = None
    clock: float = 0.0
    steps: int = 0
    adjacency: list = None
    final: bool = False
    snapshots: list = field(default_factory=list)

    @classmethod
    def empty(cls, constraints) -> "RdcpState":
        c = np.asarray(constraints, dtype=np.int64)
        n = len(c)
        return cls(
            constraints=c,
            degrees=[0] * n,
            sat_time=np.full(n, np.inf),
            dsu=DisjointSets(n),
            adjacency=[[] for _ in range(n)],
        )

    @property
    def n_vertices(self) -> int:
        return len(self.constraints)

    def add_edge(self, u: int, v: int, t: float) -> None:
        deg = self.degrees
        cons = self.constraints
        deg[u] += 1
        deg[v] += 1
        if deg[u] > cons[u] or deg[v] > cons[v]:
            raise SimulationError(f"degree constraint violated at edge ({u}, {v})")
        if deg[u] == cons[u]:
            self.sat_time[u] = t
        if deg[v] == cons[v]:
            self.sat_time[v] = t
        self.adjacency[u].append(v)
        self.adjacency[v].append(u)
        self.edges_added.append((u, v, t))
        self.dsu.union(u, v)
        self.steps += 1
        self.clock = t

    def unsaturated_fraction(self) -> float:
        return float(np.mean(np.isinf(self.sat_time)))

    def edge_set(self) -> set:
        return {(min(u, v), max(u, v)) for u, v, _ in self.edges_added}

    def component_stats(self) -> ComponentStats:
        return component_stats(self)

    def neighborhood(self, v: int, R: int) -> bytes:
        return neighborhood(self, v, R)


def assign_constraints(host: HostGraph, dist: DegreeDistribution, rng) -> np.ndarray:
    return dist.sample(rng, size=host.n_vertices)


class _Snapshots:
    """Record summary rows the first time the clock passes each requested time."""

    def __init__(self, times):
        self.times = sorted(times or [])
        self.i = 0
        self.rows = []

    def advance(self, state: RdcpState, t_next: float) -> None:
        while self.i < len(self.times) and self.times[self.i] < t_next:
            self.rows.append(summary_row(state, self.times[self.i]))
            self.i += 1

    def flush(self, state: RdcpState) -> None:
        # times past the stop point are only meaningful once the graph is final
        horizon = math.inf if state.final else math.nextafter(state.clock, math.inf)
        self.advance(state, horizon)


def summary_row(state: RdcpState, t: float) -> dict:
    cs = component_stats(state)
    return {
        "t": t,
        "edges": state.steps,
        "unsat_frac": state.unsaturated_fraction(),
        "largest": cs.largest,
        "susceptibility": cs.susceptibility,
    }


def simulate(
    host: HostGraph,
    constraints,
    stop,
    rng: np.random.Generator,
    snapshot_times=None,
    max_events: int = 50_000_000,
) -> RdcpState:
    """Run the process on ``host`` until ``stop``.

    ``stop`` is ``UntilTime(t)``, ``UntilSteps(k)`` or ``UntilFinal()``.
    Edges whose clock equals the stop time exactly are included. With
    ``snapshot_times`` the returned state carries ``snapshots``: one summary
    row per requested time.
    """
    constraints = np.asarray(constraints, dtype=np.int64)
    if len(constraints) != host.n_vertices:
        raise ValueError("constraints length must equal the number of host vertices")
    if np.any(constraints < 1):
        raise ValueError("degree constraints must be positive")
    if isinstance(stop, UntilTime) and not stop.t >= 0:
        raise ValueError(f"stop time must be non-negative, got {stop.t}")
    if isinstance(stop, UntilSteps) and stop.k < 0:
        raise ValueError(f"step count must be non-negative, got {stop.k}")
    state = RdcpState.empty(constraints)
    snaps = _Snapshots(snapshot_times)
    if host.is_implicit and isinstance(stop, UntilFinal):
        if len(host.blocks) != 1 or host.blocks[0].kind != "complete":
            raise SimulationError(
                "UntilFinal on an implicit host needs a single complete block; "
                "materialize the host instead"
            )
    if host.is_implicit:
        _run_lazy(host, state, stop, rng, snaps, max_events)
    else:
        _run_materialized(host, state, stop, rng, snaps)
    snaps.flush(state)
    state.snapshots = snaps.rows
    return state


def activation_times(host: HostGraph, rng: np.random.Generator):
    """Host edges and their clocks in processing order."""
    edges = host.edges()
    x = rng.exponential(host.r_n, size=len(edges))
    order = np.lexsort((np.arange(len(edges)), x))
    return edges[order], x[order]


def simulate_with_times(constraints, edges, times, stop) -> RdcpState:
    """Run the process on explicit ``edges`` with given clocks ``times``."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    times = np.asarray(times, dtype=float)
    order = np.lexsort((np.arange(len(edges)), times))
    state = RdcpState.empty(np.asarray(constraints, dtype=np.int64))
    snaps = _Snapshots(None)
    _process_sorted(state, edges[order], times[order], stop, snaps)
    return state


def _run_materialized(host, state, stop, rng, snaps):
    edges, times = activation_times(host, rng)
    _process_sorted(state, edges, times, stop, snaps)


def _process_sorted(state, edges, times, stop, snaps):
    t_stop = stop.t if isinstance(stop, UntilTime) else math.inf
    k_stop = stop.k if isinstance(stop, UntilSteps) else math.inf
    if state.steps >= k_stop:
        return
    deg = state.degrees
    cons = state.constraints.tolist()
    us = edges[:, 0].tolist()
    vs = edges[:, 1].tolist()
    ts = times.tolist()
    for u, v, t in zip(us, vs, ts):
        if t > t_stop:
            break
        if deg[u] < cons[u] and deg[v] < cons[v]:
            snaps.advance(state, t)
            state.add_edge(u, v, t)
            if state.steps >= k_stop:
                return
    else:
        state.final = True
    if isinstance(stop, UntilTime):
        state.clock = t_stop


def _run_lazy(host, state, stop, rng, snaps, max_events):
    blocks = host.blocks
    m = host.n_edges
    rate = m / host.r_n
    block_cdf = np.cumsum([b.n_edges for b in blocks]) / m
    t_stop = stop.t if isinstance(stop, UntilTime) else math.inf
    k_stop = stop.k if isinstance(stop, UntilSteps) else math.inf
    if state.steps >= k_stop:
        return
    deg = state.degrees
    cons = state.constraints.tolist()
    adj = state.adjacency
    n_unsat = state.n_vertices
    t = 0.0
    events = 0
    final_mode = isinstance(stop, UntilFinal)
    while True:
        gaps = rng.exponential(1.0 / rate, size=_BATCH)
        us, vs = _lazy_pairs(blocks, block_cdf, rng, _BATCH)
        for gap, u, v in zip(gaps.tolist(), us.tolist(), vs.tolist()):
            t += gap
            if t > t_stop:
                state.clock = t_stop
                return
            if deg[u] < cons[u] and deg[v] < cons[v] and v not in adj[u]:
                snaps.advance(state, t)
                state.add_edge(u, v, t)
                n_unsat -= (deg[u] == cons[u]) + (deg[v] == cons[v])
                if state.steps >= k_stop:
                    return
        events += _BATCH
        if events > max_events:
            raise MemoryCapExceeded(f"lazy sampler exceeded {max_events} activations")
        if final_mode:
            # once few unsaturated vertices remain, draw only relevant arrivals
            relevant = n_unsat * (n_unsat - 1) / 2
            if relevant < 0.02 * m:
                _finish_candidates(host, state, t, snaps, rng)
                return


def _lazy_pairs(blocks, block_cdf, rng, size):
    if len(blocks) == 1:
        bi = np.zeros(size, dtype=np.int64)
    else:
        bi = np.searchsorted(block_cdf, rng.random(size), side="right")
        bi = np.minimum(bi, len(blocks) - 1)
    sizes = np.array([b.size for b in blocks])[bi]
    offs = np.array([b.offset for b in blocks])[bi]
    kinds = np.array([b.kind == "complete" for b in blocks])[bi]
    r1 = rng.random(size)
    r2 = rng.random(size)
    # complete block: ordered pair of distinct vertices
    u_c = np.floor(r1 * sizes).astype(np.int64)
    v_c = np.floor(r2 * (sizes - 1)).astype(np.int64)
    v_c += v_c >= u_c
    # bipartite block: one vertex from each half
    h = sizes // 2
    u_b = np.floor(r1 * h).astype(np.int64)
    v_b = np.floor(r2 * h).astype(np.int64) + h
    u = np.where(kinds, u_c, u_b) + offs
    v = np.where(kinds, v_c, v_b) + offs
    return u, v


def _finish_candidates(host, state, t, snaps, rng):
    """Continue to the final graph drawing only arrivals on relevant pairs.

    Relevant pairs join two unsaturated vertices and are not yet edges; by
    Poisson thinning their arrivals form a stream of rate
    ``#relevant / r_n`` with uniform marks. Single complete block only.
    """
    deg, cons, adj = state.degrees, state.constraints, state.adjacency
    unsat = [v for v in range(state.n_vertices) if deg[v] < cons[v]]
    pos = {v: i for i, v in enumerate(unsat)}
    inner = sum(1 for v in unsat for u in adj[v] if u in pos) // 2
    while len(unsat) > 1:
        k = len(unsat)
        relevant = k * (k - 1) // 2 - inner
        if relevant <= 0:
            break
        t += rng.exponential(host.r_n / relevant)
        if relevant * 8 >= k * (k - 1) // 2:
            while True:
                i, j = rng.integers(k), rng.integers(k - 1)
                j += j >= i
                u, v = unsat[i], unsat[j]
                if v not in adj[u]:
                    break
        else:
            cands = [
                (unsat[i], unsat[j])
                for i in range(k)
                for j in range(i + 1, k)
                if unsat[j] not in adj[unsat[i]]
            ]
            u, v = cands[rng.integers(len(cands))]
        snaps.advance(state, t)
        state.add_edge(u, v, t)
        inner += 1
        for w in (u, v):
            if deg[w] == cons[w]:
                inner -= sum(1 for x in adj[w] if x in pos)
                i = pos.pop(w)
                last = unsat.pop()
                if last != w:
                    unsat[i] = last
                    pos[last] = i
    state.final = True


def component_stats(state: RdcpState) -> ComponentStats:
    dsu = state.dsu
    return ComponentStats(dsu.largest, dsu.sum_sq / dsu.n, dsu.count)


def ball(adjacency, v: int, R: int):
    """Vertices within distance ``R`` of ``v`` and the ball's edges.

    An edge belongs to the ball iff one endpoint is at distance < R, so at
    ``R = 1`` edges between two neighbours of ``v`` are left out.
    """
    dist = {v: 0}
    frontier = [v]
    edges = set()
    for r in range(R):
        nxt = []
        for x in frontier:
            for y in adjacency[x]:
                edges.add((x, y) if x < y else (y, x))
                if y not in dist:
                    dist[y] = r + 1
                    nxt.append(y)
        frontier = nxt
    return dist, edges


def neighborhood(state: RdcpState, v: int, R: int) -> bytes:
    """Canonical code of the rooted radius-``R`` ball around ``v``."""
    if R < 0:
        raise ValueError("radius must be non-negative")
    dist, edges = ball(state.adjacency, v, R)
    return canonical_code(v, edges)


def simulate_discrete_rejection(host: HostGraph, constraints, k: int, rng) -> RdcpState:
    """Discrete-time process by direct sampling, for tiny hosts.

    Each step adds an edge chosen uniformly among host edges that are not yet
    present and join two unsaturated vertices. Independent of the clock-based
    construction; used as its oracle.
    """
    state = RdcpState.empty(constraints)
    host_edges = [tuple(e) for e in host.materialized().edges().tolist()]
    present = set()
    deg, cons = state.degrees, state.constraints
    for step in range(k):
        admissible = [
            e
            for e in host_edges
            if e not in present and deg[e[0]] < cons[e[0]] and deg[e[1]] < cons[e[1]]
        ]
        if not admissible:
            state.final = True
            break
        u, v = admissible[rng.integers(len(admissible))]
        present.add((u, v))
        state.add_edge(u, v, float(step + 1))
    return state


def final_graph_is_maximal(host: HostGraph, state: RdcpState) -> bool:
    """Every host edge not added has a saturated endpoint."""
    present = state.edge_set()
    deg, cons = state.degrees, state.constraints
    for u, v in host.materialized().edges().tolist():
        if (u, v) not in present and deg[u] < cons[u] and deg[v] < cons[v]:
            return False
    return True
