"""Finite host graphs for the degree-constrained process.

Dense families (complete and complete bipartite blocks) can be stored
implicitly: adjacency is answered by formula and the edge set is never
enumerated. Everything else is kept as a CSR adjacency structure.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

MATERIALIZE_THRESHOLD = 2000


class HostGraphError(ValueError):
    pass


class Block(NamedTuple):
    """A dense block on vertices ``offset .. offset + size - 1``.

    ``kind`` is ``"complete"`` or ``"bipartite"``; a bipartite block splits its
    vertices into two equal halves.
    """

    kind: str
    offset: int
    size: int

    @property
    def n_edges(self) -> int:
        if self.kind == "complete":
            return self.size * (self.size - 1) // 2
        h = self.size // 2
        return h * h


@dataclass(frozen=True, eq=False)
class HostGraph:
    n_vertices: int
    r_n: float
    family: str
    indptr: np.ndarray | None = None
    indices: np.ndarray | None = None
    blocks: tuple = ()

    @property
    def is_implicit(self) -> bool:
        return self.indptr is None

    @property
    def n_edges(self) -> int:
        if self.is_implicit:
            return sum(b.n_edges for b in self.blocks)
        return int(self.indptr[-1]) // 2

    def _block_of(self, v: int) -> Block:
        for b in self.blocks:
            if b.offset <= v < b.offset + b.size:
                return b
        raise IndexError(v)

    def neighbors(self, v: int) -> np.ndarray:
        if not 0 <= v < self.n_vertices:
            raise IndexError(v)
        if not self.is_implicit:
            return self.indices[self.indptr[v] : self.indptr[v + 1]]
        b = self._block_of(v)
        if b.kind == "complete":
            r = np.arange(b.offset, b.offset + b.size)
            return r[r != v]
        h = b.size // 2
        if v < b.offset + h:
            return np.arange(b.offset + h, b.offset + b.size)
        return np.arange(b.offset, b.offset + h)

    def has_edge(self, u: int, v: int) -> bool:
        if u == v:
            return False
        if not self.is_implicit:
            nb = self.neighbors(u)
            i = np.searchsorted(nb, v)
            return bool(i < len(nb) and nb[i] == v)
        b = self._block_of(u)
        if not b.offset <= v < b.offset + b.size:
            return False
        if b.kind == "complete":
            return True
        h = b.size // 2
        return (u < b.offset + h) != (v < b.offset + h)

    def degrees(self) -> np.ndarray:
        if not self.is_implicit:
            return np.diff(self.indptr)
        deg = np.zeros(self.n_vertices, dtype=np.int64)
        for b in self.blocks:
            deg[b.offset : b.offset + b.size] = (
                b.size - 1 if b.kind == "complete" else b.size // 2
            )
        return deg

    def edges(self) -> np.ndarray:
        """All edges as an ``(m, 2)`` array with ``u < v``, sorted."""
        if self.is_implicit:
            raise HostGraphError(
                f"refusing to enumerate {self.n_edges} edges of an implicit host"
            )
        src = np.repeat(np.arange(self.n_vertices), np.diff(self.indptr))
        keep = src < self.indices
        return np.column_stack([src[keep], self.indices[keep]])

    def materialized(self) -> "HostGraph":
        if not self.is_implicit:
            return self
        parts = []
        for b in self.blocks:
            parts.append(_block_edges(b))
        e = np.concatenate(parts) if parts else np.zeros((0, 2), dtype=np.int64)
        g = from_edges(self.n_vertices, e, r_n=self.r_n)
        return HostGraph(
            self.n_vertices, self.r_n, self.family, g.indptr, g.indices, self.blocks
        )


def _block_edges(b: Block) -> np.ndarray:
    if b.kind == "complete":
        iu, ju = np.triu_indices(b.size, k=1)
        return np.column_stack([iu + b.offset, ju + b.offset])
    h = b.size // 2
    a, c = np.meshgrid(np.arange(h), np.arange(h), indexing="ij")
    return np.column_stack([a.ravel() + b.offset, c.ravel() + b.offset + h])


def _csr(n: int, edges: np.ndarray):
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    src = np.concatenate([edges[:, 0], edges[:, 1]])
    dst = np.concatenate([edges[:, 1], edges[:, 0]])
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, src + 1, 1)
    return np.cumsum(indptr), dst


def from_edges(n: int, edges, r_n: float | None = None, family: str = "explicit"):
    """Explicit host from an edge list. ``r_n`` defaults to the mean degree."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if n < 1:
        raise HostGraphError("need at least one vertex")
    if len(edges):
        if edges.min() < 0 or edges.max() >= n:
            raise HostGraphError("edge endpoint out of range")
        if np.any(edges[:, 0] == edges[:, 1]):
            raise HostGraphError("self-loops are not allowed")
        lo = np.minimum(edges[:, 0], edges[:, 1])
        hi = np.maximum(edges[:, 0], edges[:, 1])
        key = lo * n + hi
        if len(np.unique(key)) != len(key):
            raise HostGraphError("multi-edges are not allowed")
        edges = np.column_stack([lo, hi])
    indptr, indices = _csr(n, edges)
    if r_n is None:
        r_n = 2.0 * len(edges) / n
    return HostGraph(n, float(r_n), family, indptr, indices)


def complete(n: int, materialize: bool | None = None) -> HostGraph:
    if n < 2:
        raise HostGraphError(f"complete graph needs n >= 2, got {n}")
    blocks = (Block("complete", 0, n),)
    g = HostGraph(n, float(n - 1), "complete", blocks=blocks)
    if materialize is None:
        materialize = n <= MATERIALIZE_THRESHOLD
    return g.materialized() if materialize else g


def complete_bipartite(n: int, m: int | None = None, materialize: bool | None = None):
    """K_{n,n}. Only balanced bipartite hosts are supported."""
    if m is not None and m != n:
        raise HostGraphError("only balanced complete bipartite hosts are supported")
    if n < 2:
        raise HostGraphError(f"complete bipartite graph needs n >= 2, got {n}")
    blocks = (Block("bipartite", 0, 2 * n),)
    g = HostGraph(2 * n, float(n), "complete_bipartite", blocks=blocks)
    if materialize is None:
        materialize = n <= MATERIALIZE_THRESHOLD
    return g.materialized() if materialize else g


def random_regular(
    n: int, r: int, rng: np.random.Generator, max_restarts: int = 1000
) -> HostGraph:
    """Uniform-ish simple r-regular graph by stub pairing.

    Stubs are paired at random; a pair that would create a loop or a repeated
    edge is redrawn, and the whole pairing restarts if no legal pair remains.
    """
    if r < 0 or r >= n:
        raise HostGraphError(f"need 0 <= r < n, got r={r}, n={n}")
    if (n * r) % 2:
        raise HostGraphError(f"n*r must be even, got n={n}, r={r}")
    for _ in range(max_restarts):
        edges = _try_pairing(n, r, rng)
        if edges is not None:
            g = from_edges(n, edges, r_n=float(r), family="random_regular")
            return g
    raise HostGraphError(f"random_regular({n}, {r}) failed after {max_restarts} restarts")


def _try_pairing(n, r, rng):
    stubs = np.repeat(np.arange(n), r)
    rng.shuffle(stubs)
    stubs = stubs.tolist()
    seen = set()
    edges = []
    while stubs:
        # draw a legal pair among the remaining stubs; give up after a few misses
        for _ in range(100):
            m = len(stubs)
            i = int(rng.integers(m))
            j = int(rng.integers(m - 1))
            if j >= i:
                j += 1
            u, v = stubs[i], stubs[j]
            if u == v:
                continue
            key = (u, v) if u < v else (v, u)
            if key in seen:
                continue
            break
        else:
            if not _legal_pair_exists(stubs, seen):
                return None
            continue
        seen.add(key)
        edges.append(key)
        for k in sorted((i, j), reverse=True):
            stubs[k] = stubs[-1]
            stubs.pop()
    return np.array(edges, dtype=np.int64).reshape(-1, 2)


def _legal_pair_exists(stubs, seen):
    vals = sorted(set(stubs))
    for a in range(len(vals)):
        for b in range(a + 1, len(vals)):
            if (vals[a], vals[b]) not in seen:
                return True
    return False


def disjoint_union(*hosts: HostGraph) -> HostGraph:
    """Disjoint union; ``r_n`` is the mean degree of the union.

    Note the union is disconnected, so it is not a high degree almost regular
    host in the strict sense; ``degree_stats`` still reports regularity.
    """
    if not hosts:
        raise HostGraphError("empty union")
    n = sum(h.n_vertices for h in hosts)
    m = sum(h.n_edges for h in hosts)
    r_n = 2.0 * m / n
    if all(h.is_implicit for h in hosts):
        blocks, off = [], 0
        for h in hosts:
            blocks.extend(Block(b.kind, b.offset + off, b.size) for b in h.blocks)
            off += h.n_vertices
        return HostGraph(n, r_n, "union", blocks=tuple(blocks))
    parts, blocks, off = [], [], 0
    for h in hosts:
        parts.append(h.materialized().edges() + off)
        blocks.extend(Block(b.kind, b.offset + off, b.size) for b in h.blocks)
        off += h.n_vertices
    g = from_edges(n, np.concatenate(parts), r_n=r_n, family="union")
    return HostGraph(n, r_n, "union", g.indptr, g.indices, tuple(blocks))


def is_connected(host: HostGraph) -> bool:
    if host.is_implicit:
        return len(host.blocks) == 1
    seen = np.zeros(host.n_vertices, dtype=bool)
    seen[0] = True
    stack = [0]
    while stack:
        v = stack.pop()
        for u in host.neighbors(v):
            if not seen[u]:
                seen[u] = True
                stack.append(int(u))
    return bool(seen.all())


class DegreeStats(NamedTuple):
    min_degree: int
    max_degree: int
    mean_degree: float
    outside_fraction: float
    connected: bool


def degree_stats(host: HostGraph, b: float = 0.01) -> DegreeStats:
    """Single-instance regularity diagnostic.

    ``outside_fraction`` is the share of vertices whose degree falls outside
    ``[(1 - b) r_n, (1 + b) r_n]``.
    """
    deg = host.degrees()
    lo, hi = (1 - b) * host.r_n, (1 + b) * host.r_n
    outside = float(np.mean((deg < lo) | (deg > hi)))
    return DegreeStats(
        int(deg.min()), int(deg.max()), float(deg.mean()), outside, is_connected(host)
    )


def parse_host(text: str, rng: np.random.Generator | None = None) -> HostGraph:
    """Parse ``complete:n``, ``bipartite:n``, ``regular:n:r`` or
    ``union:<spec>:<spec>`` (e.g. ``union:complete:50:complete:50``)."""
    tokens = text.strip().split(":")
    host, rest = _parse_tokens(tokens, rng, text)
    if rest:
        raise HostGraphError(f"trailing fields in host spec {text!r}: {':'.join(rest)}")
    return host


def _parse_tokens(tokens, rng, text):
    if not tokens or not tokens[0]:
        raise HostGraphError(f"empty host spec {text!r}")
    kind, rest = tokens[0], tokens[1:]

    def ints(k):
        if len(rest) < k:
            raise HostGraphError(f"host spec {text!r}: {kind} needs {k} integer field(s)")
        try:
            return [int(x) for x in rest[:k]], rest[k:]
        except ValueError:
            raise HostGraphError(f"host spec {text!r}: non-integer field in {kind}") from None

    if kind == "complete":
        (n,), rest = ints(1)
        return complete(n), rest
    if kind == "bipartite":
        (n,), rest = ints(1)
        return complete_bipartite(n), rest
    if kind == "regular":
        (n, r), rest = ints(2)
        if rng is None:
            rng = np.random.default_rng(0)
        return random_regular(n, r, rng), rest
    if kind == "union":
        a, rest = _parse_tokens(rest, rng, text)
        b, rest = _parse_tokens(rest, rng, text)
        return disjoint_union(a, b), rest
    raise HostGraphError(f"unknown host family {kind!r} in {text!r}")
