"""Two-phase exploration and truncated phantom saturation times.

An exploration tree is grown from a root. Nodes at depth below ``R`` are in
the breadth-first phase: every incident edge with clock ``<= t_hat`` becomes a
child. Deeper nodes are in the monotone phase: only edges with clock strictly
below the node's own edge label are followed. Whether a vertex is saturated
before time ``s`` only depends on its edges with clocks below ``s`` and, for
each of those, on the other endpoint's state just before that clock; the
monotone phase explores exactly this dependency cone.

Truncated phantom times are computed from the leaves up. A node's value is
the ``d``-th smallest clock among children that are still unsaturated when
their edge fires, capped at the node's threshold (``t_hat`` for the
breadth-first phase, its label otherwise). A child ``c`` counts iff
``tau_c <= T_c``: a monotone-phase child has ``T_c = tau_c`` exactly when it
is unsaturated at ``tau_c``.

Ball edges are decided by messages in both directions: the edge ``x - y`` at
clock ``tau`` is present iff neither endpoint is saturated before ``tau`` in
the graph without that edge. Downward messages carry the parent side.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from rdcp.canonical import LEAF


class CycleAlarm(RuntimeError):
    """The explored region is not a tree; the reconstruction would be unsound."""


class CapExceeded(RuntimeError):
    pass


@dataclass
class ExplorationTree:
    """Nodes in breadth-first order; ``parent[0] == -1``."""

    t_hat: float
    R: int
    parent: list = field(default_factory=list)
    tau: list = field(default_factory=list)
    depth: list = field(default_factory=list)
    d: list = field(default_factory=list)
    children: list = field(default_factory=list)
    vertex: list = field(default_factory=list)

    def add(self, parent: int, tau: float, d: int, vertex=None) -> int:
        i = len(self.parent)
        self.parent.append(parent)
        self.tau.append(tau)
        self.depth.append(0 if parent < 0 else self.depth[parent] + 1)
        self.d.append(int(d))
        self.children.append([])
        self.vertex.append(vertex)
        if parent >= 0:
            self.children[parent].append(i)
        return i

    def __len__(self):
        return len(self.parent)

    def threshold(self, i: int) -> float:
        return self.t_hat if self.depth[i] < self.R else self.tau[i]


def truncated_times(tree: ExplorationTree) -> list:
    """Leaf-up recursion; a leaf gets its threshold."""
    n = len(tree)
    T = [0.0] * n
    tau, ch, d = tree.tau, tree.children, tree.d
    for x in range(n - 1, -1, -1):
        ok = sorted(tau[c] for c in ch[x] if tau[c] <= T[c])
        cap = tree.threshold(x)
        T[x] = min(ok[d[x] - 1], cap) if len(ok) >= d[x] else cap
    return T


def ball_edges(tree: ExplorationTree, T=None) -> list:
    """Present edges ``(parent, child)`` of the radius-``R`` ball around node 0."""
    if T is None:
        T = truncated_times(tree)
    tau, ch, d, depth = tree.tau, tree.children, tree.d, tree.depth
    R = tree.R
    parent_ok = [False] * len(tree)
    present = []
    frontier = [0]
    # only nodes reached through present edges need messages
    while frontier:
        nxt = []
        for x in frontier:
            if depth[x] >= R:
                continue
            ok = [tau[c] for c in ch[x] if tau[c] <= T[c]]
            if x != 0 and parent_ok[x]:
                ok.append(tau[x])
            ok.sort()
            for y in ch[x]:
                others = ok
                if tau[y] <= T[y]:
                    others = list(ok)
                    others.remove(tau[y])
                sat = others[d[x] - 1] if len(others) >= d[x] else math.inf
                parent_ok[y] = tau[y] < sat
                if parent_ok[y] and tau[y] <= T[y]:
                    present.append((x, y))
                    nxt.append(y)
        frontier = nxt
    return present


def ball_code(tree: ExplorationTree, T=None) -> bytes:
    edges = ball_edges(tree, T)
    if not edges:
        return LEAF
    kids = {}
    for x, y in edges:
        kids.setdefault(x, []).append(y)
    return _code(0, kids)


def _code(root, kids) -> bytes:
    order = [root]
    for x in order:
        order.extend(kids.get(x, ()))
    codes = {}
    for x in reversed(order):
        codes[x] = b"(" + b"".join(sorted(codes[c] for c in kids.get(x, ()))) + b")"
    return codes[root]


def host_incidence(n: int, edges, times) -> list:
    """Per-vertex ``(clock, neighbour)`` lists sorted by clock."""
    inc = [[] for _ in range(n)]
    for (u, v), t in zip(np.asarray(edges).tolist(), np.asarray(times).tolist()):
        inc[u].append((t, v))
        inc[v].append((t, u))
    for lst in inc:
        lst.sort()
    return inc


def explore_host(incidence, constraints, root: int, t_hat: float, R: int, max_nodes: int = 100_000) -> ExplorationTree:
    """Explore a finite host from ``root`` using fixed edge clocks.

    Raises ``CycleAlarm`` when an explored edge reaches a vertex that is
    already in the tree.
    """
    if R < 0:
        raise ValueError("R must be non-negative")
    tree = ExplorationTree(t_hat, R)
    tree.add(-1, math.inf, constraints[root], root)
    seen = {root}
    queue = deque([0])
    while queue:
        x = queue.popleft()
        v = tree.vertex[x]
        bfs = tree.depth[x] < R
        lim = t_hat if bfs else tree.tau[x]
        up = tree.vertex[tree.parent[x]] if x else None
        for t, w in incidence[v]:
            if t > lim or (not bfs and t >= lim):
                break
            if w == up and t == tree.tau[x]:
                continue
            if w in seen:
                raise CycleAlarm(f"edge {v}-{w} closes a cycle")
            seen.add(w)
            queue.append(tree.add(x, t, constraints[w], w))
            if len(tree) > max_nodes:
                raise CapExceeded(f"exploration exceeded {max_nodes} nodes")
    return tree


def host_ball_edges(tree: ExplorationTree) -> set:
    """Ball edges translated back to host vertex pairs ``(min, max)``."""
    out = set()
    for x, y in ball_edges(tree):
        a, b = tree.vertex[x], tree.vertex[y]
        out.add((a, b) if a < b else (b, a))
    return out


def pwit_tree(dist, t_hat: float, R: int, rng: np.random.Generator, max_nodes: int = 100_000) -> ExplorationTree:
    """Exploration of the Poisson weighted infinite tree.

    Child labels are unit-rate Poisson arrivals on ``[0, t_hat]`` in the
    breadth-first phase and on ``[0, tau)`` in the monotone phase.
    """
    if not (0 <= t_hat < math.inf):
        raise ValueError("PWIT exploration needs a finite t_hat")
    tree = ExplorationTree(t_hat, R)
    tree.add(-1, math.inf, dist.sample(rng))
    x = 0
    while x < len(tree):
        lim = t_hat if tree.depth[x] < R else tree.tau[x]
        k = rng.poisson(lim)
        if k:
            labels = np.sort(rng.random(k) * lim).tolist()
            ds = dist.sample(rng, k).tolist()
            for t, dc in zip(labels, ds):
                tree.add(x, t, dc)
            if len(tree) > max_nodes:
                raise CapExceeded(f"PWIT exploration exceeded {max_nodes} nodes")
        x += 1
    return tree


def pwit_codes(dist, t_hat: float, R: int, n: int, rng: np.random.Generator) -> list:
    return [ball_code(pwit_tree(dist, t_hat, R, rng)) for _ in range(n)]
