"""Canonical codes for rooted graphs and neighbourhood censuses."""

from __future__ import annotations

import itertools
import math
from collections import Counter, defaultdict

LEAF = b"()"
_MAX_CANDIDATES = 2_000_000


def _adjacency(root, edges):
    adj = defaultdict(set)
    adj[root]
    for u, v in edges:
        if u == v:
            raise ValueError("self-loop in rooted graph")
        adj[u].add(v)
        adj[v].add(u)
    return adj


def canonical_code(root, edges) -> bytes:
    """Code of the rooted isomorphism class of a connected graph.

    ``edges`` is an iterable of vertex pairs; vertices may be any hashable.
    Trees get the AHU form (children codes sorted and nested), anything with a
    cycle gets ``b"G"`` followed by the lexicographically least adjacency
    string over all root-fixing relabellings allowed by colour refinement.
    Equal codes iff root-preserving isomorphic.
    """
    edges = {(u, v) if _key(u) <= _key(v) else (v, u) for u, v in edges}
    adj = _adjacency(root, edges)
    if len(edges) == len(adj) - 1:
        return tree_code(root, adj)
    return _graph_code(root, adj)


def _key(x):
    return (type(x).__name__, x)


def tree_code(root, adj) -> bytes:
    order = [root]
    parent = {root: None}
    for x in order:
        for y in adj[x]:
            if y != parent[x]:
                if y in parent:
                    raise ValueError("graph is not a tree")
                parent[y] = x
                order.append(y)
    if len(order) != len(adj):
        raise ValueError("rooted graph is not connected")
    codes = {}
    kids = defaultdict(list)
    for x in reversed(order):
        c = b"(" + b"".join(sorted(kids[x])) + b")"
        codes[x] = c
        if parent[x] is not None:
            kids[parent[x]].append(c)
    return codes[root]


def children_code(children, root=0) -> bytes:
    """AHU code from a ``children`` list-of-lists indexed by node."""
    order = [root]
    for x in order:
        order.extend(children[x])
    codes = {}
    for x in reversed(order):
        codes[x] = b"(" + b"".join(sorted(codes[c] for c in children[x])) + b")"
    return codes[root]


def _graph_code(root, adj) -> bytes:
    dist = {root: 0}
    frontier = [root]
    while frontier:
        nxt = []
        for x in frontier:
            for y in adj[x]:
                if y not in dist:
                    dist[y] = dist[x] + 1
                    nxt.append(y)
        frontier = nxt
    if len(dist) != len(adj):
        raise ValueError("rooted graph is not connected")
    verts = list(adj)
    color = {v: (dist[v],) for v in verts}
    n_colors = len(set(color.values()))
    while True:
        sig = {v: (color[v], tuple(sorted(color[u] for u in adj[v]))) for v in verts}
        ranks = {s: i for i, s in enumerate(sorted(set(sig.values())))}
        new = {v: (ranks[sig[v]],) for v in verts}
        k = len(ranks)
        color = new
        if k == n_colors:
            break
        n_colors = k
    cells = defaultdict(list)
    for v in verts:
        cells[color[v]].append(v)
    cell_list = [cells[c] for c in sorted(cells)]
    n_candidates = math.prod(math.factorial(len(c)) for c in cell_list)
    if n_candidates > _MAX_CANDIDATES:
        raise ValueError(f"rooted graph too symmetric for exhaustive coding ({n_candidates})")
    n = len(verts)
    best = None
    for perms in itertools.product(*(itertools.permutations(c) for c in cell_list)):
        order = [v for p in perms for v in p]
        idx = {v: i for i, v in enumerate(order)}
        bits = bytearray(b"0" * (n * (n - 1) // 2))
        for v in verts:
            i = idx[v]
            for u in adj[v]:
                j = idx[u]
                if i < j:
                    bits[i * n - i * (i + 1) // 2 + (j - i - 1)] = 49
        cand = bytes(bits)
        if best is None or cand < best:
            best = cand
    header = ",".join(str(len(c)) for c in cell_list).encode()
    return b"G" + str(n).encode() + b":" + header + b":" + best


def census(codes) -> dict:
    """Empirical frequencies of codes; values sum to one."""
    counts = Counter(codes)
    total = sum(counts.values())
    if total == 0:
        raise ValueError("census needs at least one sample")
    return {c: counts[c] / total for c in sorted(counts)}


def tv_distance(a: dict, b: dict) -> float:
    keys = set(a) | set(b)
    return 0.5 * sum(abs(a.get(k, 0.0) - b.get(k, 0.0)) for k in keys)
