"""Samplers for the local limit of the process around a uniform vertex.

Two independent constructions: the explicit multi-type branching process
(types are phantom saturation times) and the exploration of the Poisson
weighted infinite tree with the leaf-up recursion. Their rooted balls have the
same law, which makes each an oracle for the other.

The branching-process densities are handled in lambda-space. With
``s = t(l)`` the inverse of ``lambda``, ``f(s) ds = pi(l) dl`` and all the
CDFs needed below are closed forms in ``l``; the only tabulated map is
``t(l)``, a cubic Hermite interpolant with exact slopes ``1 / Psi(l)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from rdcp.canonical import LEAF
from rdcp.exploration import pwit_tree, truncated_times, ball_edges
from rdcp.ode import LambdaSolution

TABLE_POINTS = 2**14
_BISECT_ITERS = 64


class StreamExhausted(LookupError):
    """The arrival stream ended before ``D`` children were accepted."""


def rde_chi(arrivals, D: int, child_types) -> float:
    """``tau^N`` with ``N`` the index of the ``D``-th arrival that beats its child's type."""
    if D < 1:
        raise ValueError("D must be positive")
    accepted = 0
    prev = -math.inf
    for tau, T in zip(arrivals, child_types):
        if tau <= prev:
            raise ValueError("arrival stream must be strictly increasing")
        prev = tau
        if tau < T:
            accepted += 1
            if accepted == D:
                return tau
    raise StreamExhausted(f"only {accepted} of {D} arrivals accepted")


@dataclass
class SampledTree:
    """Rooted tree with node types, constraints and edge labels.

    Node 0 is the root (``parent == -1``, ``tau`` is ``nan``). Children lists
    are sorted by label.
    """

    parent: np.ndarray
    tau: np.ndarray
    T: np.ndarray
    d: np.ndarray
    children: list = field(repr=False)
    truncated: bool = False

    def __len__(self):
        return len(self.parent)

    def depth(self) -> np.ndarray:
        out = np.zeros(len(self), dtype=np.int64)
        for i in range(1, len(self)):
            out[i] = out[self.parent[i]] + 1
        return out

    def code(self) -> bytes:
        return _ahu(self.children)

    def check(self, t_hat: float = math.inf) -> None:
        """Assert the structural invariants of a branching-process sample."""
        for i, ch in enumerate(self.children):
            cap = self.d[i] if i == 0 else self.d[i] - 1
            assert len(ch) <= cap, f"node {i} has {len(ch)} children, cap {cap}"
            labels = [self.tau[c] for c in ch]
            assert all(a < b for a, b in zip(labels, labels[1:])), "sibling labels not increasing"
            for c in ch:
                assert self.tau[c] < t_hat
                if i != 0:
                    assert self.tau[c] <= self.T[i]


def _ahu(children, root: int = 0) -> bytes:
    order = [root]
    for x in order:
        order.extend(children[x])
    codes = {}
    for x in reversed(order):
        codes[x] = b"(" + b"".join(sorted(codes[c] for c in children[x])) + b")"
    return codes[root]


def _bisect_increasing(fn, target, lo, hi, iters=_BISECT_ITERS):
    """Vectorized bisection for ``fn(x) = target`` with ``fn`` increasing."""
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        below = fn(mid) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


class MtbpSampler:
    """Vectorized sampler for the branching process built on ``sol``."""

    def __init__(self, sol: LambdaSolution, points: int = TABLE_POINTS):
        self.sol = sol
        self.dist = sol.dist
        self.points = points
        pmf = np.asarray(self.dist.pmf)
        self._k0 = int(self.dist.support[0])
        ks = np.arange(self._k0, self.dist.delta_max + 1)
        keep = pmf[ks] > 0
        self._ks = ks[keep]
        # p_k^{t0} is proportional to l^{k-1}/(k-1)! p_k; scaled by l^{k0-1}/(k0-1)!
        self._cw = np.array([pmf[k] * math.factorial(self._k0 - 1) / math.factorial(k - 1) for k in self._ks])
        self._build(float(sol.lam(sol.horizon)))

    def _build(self, lam_max: float) -> None:
        grid = np.linspace(0.0, lam_max, self.points)
        t = self.sol.time_of_lambda(grid)
        t[0] = 0.0
        self.lam_max = lam_max
        self._t_of = CubicHermiteSpline(grid, t, 1.0 / self.sol.psi(grid))

    def _ensure(self, lam_needed: float) -> None:
        if lam_needed > self.lam_max:
            # rare: a draw landed past the solved horizon
            self._build(lam_needed + 1.0)

    def t_of(self, lam):
        lam = np.asarray(lam, dtype=float)
        if lam.size and lam.max() > self.lam_max:
            self._ensure(float(lam.max()))
        return self._t_of(lam)

    def psi_inverse(self, y):
        """The ``l`` with ``Psi(l) = y`` for ``y`` in ``(0, 1]``."""
        y = np.asarray(y, dtype=float)
        hi = self.lam_max
        while y.size and float(self.sol.psi(hi)) > y.min():
            hi = hi + 5.0
        self._ensure(hi)
        neg_psi = lambda l: -self.sol.psi(l)  # noqa: E731
        return _bisect_increasing(neg_psi, -y, np.zeros_like(y), np.full_like(y, hi))

    # -- one-step draws ----------------------------------------------------

    def root_types(self, n: int, rng: np.random.Generator):
        """``(lambda(T), T)`` for ``n`` roots; ``T`` has CDF ``1 - lambda'``."""
        u = 1.0 - rng.random(n)  # in (0, 1]
        lam = self.psi_inverse(u)
        return lam, self.t_of(lam)

    def constraints(self, lam, rng: np.random.Generator) -> np.ndarray:
        lam = np.asarray(lam, dtype=float)
        if len(self._ks) == 1:
            return np.full(lam.shape, self._ks[0], dtype=np.int64)
        w = self._cw[None, :] * lam[:, None] ** (self._ks - self._k0)[None, :]
        c = np.cumsum(w, axis=1)
        u = rng.random(len(lam)) * c[:, -1]
        idx = (c < u[:, None]).sum(axis=1)
        return self._ks[np.minimum(idx, len(self._ks) - 1)]

    def pairs(self, lam0, t0, rng: np.random.Generator):
        """One ``(tau, lambda(s), s)`` per entry from the pair density of type ``t0``.

        ``s`` has density proportional to ``f(s) min(t0, s)`` with CDF
        ``(lambda(s) - s lambda'(s)) / lambda(t0)`` below ``t0`` and
        ``(lambda(t0) - t0 lambda'(s)) / lambda(t0)`` above; then
        ``tau`` is uniform on ``[0, min(t0, s)]``.
        """
        lam0 = np.asarray(lam0, dtype=float)
        t0 = np.asarray(t0, dtype=float)
        target = rng.random(len(lam0)) * lam0
        split = lam0 - t0 * self.sol.psi(lam0)
        low = target <= split
        lam_s = np.empty_like(lam0)
        if low.any():
            h = lambda l: l - self.t_of(l) * self.sol.psi(l)  # noqa: E731
            lam_s[low] = _bisect_increasing(h, target[low], np.zeros(low.sum()), lam0[low])
        high = ~low
        if high.any():
            y = (lam0[high] - target[high]) / t0[high]
            lam_s[high] = np.maximum(self.psi_inverse(np.clip(y, 1e-300, 1.0)), lam0[high])
        s = self.t_of(lam_s)
        tau = rng.random(len(lam0)) * np.minimum(t0, s)
        return tau, lam_s, s

    def last_child(self, lam0, rng: np.random.Generator):
        """Type of the root's ``d``-th child: density ``f`` restricted to ``(t0, inf)``."""
        lam0 = np.asarray(lam0, dtype=float)
        y = self.sol.psi(lam0) * (1.0 - rng.random(len(lam0)))
        lam_s = np.maximum(self.psi_inverse(np.maximum(y, 1e-300)), lam0)
        return lam_s, self.t_of(lam_s)

    # -- whole samples -----------------------------------------------------

    def forest(self, n: int, t_hat: float, rng: np.random.Generator, max_depth: int | None = None, max_nodes: int | None = None):
        """``n`` independent root components, edges with label ``< t_hat``."""
        return _grow(self, n, t_hat, rng, max_depth, max_nodes)


@dataclass
class Forest:
    sample: np.ndarray
    parent: np.ndarray
    tau: np.ndarray
    T: np.ndarray
    lam: np.ndarray
    d: np.ndarray
    truncated: np.ndarray
    n: int

    def _children(self):
        kids = [[] for _ in range(len(self.parent))]
        for i, p in enumerate(self.parent.tolist()):
            if p >= 0:
                kids[p].append(i)
        return kids

    def codes(self) -> list:
        """AHU code of every sample's tree, in sample order."""
        kids = self._children()
        codes = [b""] * len(self.parent)
        for x in range(len(self.parent) - 1, -1, -1):
            ch = kids[x]
            codes[x] = b"(" + b"".join(sorted(codes[c] for c in ch)) + b")" if ch else LEAF
        roots = np.flatnonzero(self.parent < 0)
        return [codes[r] for r in roots.tolist()]

    def sizes(self) -> np.ndarray:
        return np.bincount(self.sample, minlength=self.n)

    def tree(self, i: int) -> SampledTree:
        idx = np.flatnonzero(self.sample == i)
        local = {g: j for j, g in enumerate(idx.tolist())}
        parent = np.array([local[p] if p >= 0 else -1 for p in self.parent[idx].tolist()], dtype=np.int64)
        children = [[] for _ in idx]
        for j, p in enumerate(parent.tolist()):
            if p >= 0:
                children[p].append(j)
        for ch in children:
            ch.sort(key=lambda c: self.tau[idx[c]])
        return SampledTree(parent, self.tau[idx], self.T[idx], self.d[idx], children, bool(self.truncated[i]))


def _grow(sampler: MtbpSampler, n, t_hat, rng, max_depth, max_nodes) -> Forest:
    max_depth = math.inf if max_depth is None else max_depth
    max_nodes = math.inf if max_nodes is None else max_nodes
    lam, T = sampler.root_types(n, rng)
    d = sampler.constraints(lam, rng)
    cols = {
        "sample": [np.arange(n)],
        "parent": [np.full(n, -1)],
        "tau": [np.full(n, np.nan)],
        "T": [T],
        "lam": [lam],
        "d": [d],
    }
    total = n
    truncated = np.zeros(n, dtype=bool)
    counts = np.ones(n, dtype=np.int64)
    # frontier: global index, sample, lam, T, number of pair children
    f_idx = np.arange(n)
    f_sample = np.arange(n)
    f_lam, f_T = lam, T
    f_m = d - 1
    is_root = True
    depth = 0
    while len(f_idx) and depth < max_depth:
        rep = np.repeat(np.arange(len(f_idx)), f_m)
        tau, c_lam, c_T = sampler.pairs(f_lam[rep], f_T[rep], rng)
        par = f_idx[rep]
        smp = f_sample[rep]
        if is_root:
            l_lam, l_T = sampler.last_child(f_lam, rng)
            tau = np.concatenate([tau, f_T])
            c_lam = np.concatenate([c_lam, l_lam])
            c_T = np.concatenate([c_T, l_T])
            par = np.concatenate([par, f_idx])
            smp = np.concatenate([smp, f_sample])
        keep = tau < t_hat
        tau, c_lam, c_T, par, smp = tau[keep], c_lam[keep], c_T[keep], par[keep], smp[keep]
        order = np.lexsort((tau, par))
        tau, c_lam, c_T, par, smp = tau[order], c_lam[order], c_T[order], par[order], smp[order]
        c_d = sampler.constraints(c_lam, rng)
        k = len(tau)
        cols["sample"].append(smp)
        cols["parent"].append(par)
        cols["tau"].append(tau)
        cols["T"].append(c_T)
        cols["lam"].append(c_lam)
        cols["d"].append(c_d)
        new_idx = np.arange(total, total + k)
        total += k
        counts += np.bincount(smp, minlength=n)
        over = counts >= max_nodes
        truncated |= over
        live = ~over[smp]
        f_idx, f_sample, f_lam, f_T, f_m = new_idx[live], smp[live], c_lam[live], c_T[live], c_d[live] - 1
        is_root = False
        depth += 1
    cat = {k: np.concatenate(v) for k, v in cols.items()}
    return Forest(
        cat["sample"].astype(np.int64),
        cat["parent"].astype(np.int64),
        cat["tau"],
        cat["T"],
        cat["lam"],
        cat["d"].astype(np.int64),
        truncated,
        n,
    )


def mtbp_component(sampler: MtbpSampler, t_hat: float, rng, max_nodes: int = 10**6, max_depth: int | None = None) -> SampledTree:
    """Component of the root using edges with label ``< t_hat``."""
    return sampler.forest(1, t_hat, rng, max_depth=max_depth, max_nodes=max_nodes).tree(0)


def mtbp_codes(sampler: MtbpSampler, t_hat: float, R: int, n: int, rng, batch: int = 20000) -> list:
    """Codes of ``n`` radius-``R`` balls; depth capping makes them exact."""
    out = []
    for start in range(0, n, batch):
        m = min(batch, n - start)
        out.extend(sampler.forest(m, t_hat, rng, max_depth=R).codes())
    return out


def pwit_explore(dist, t_hat: float, R: int, rng, max_nodes: int = 100_000) -> SampledTree:
    """Radius-``R`` ball of the PWIT exploration, with truncated times as types."""
    tree = pwit_tree(dist, t_hat, R, rng, max_nodes)
    T = truncated_times(tree)
    edges = ball_edges(tree, T)
    keep = [0] + [y for _, y in edges]
    local = {g: j for j, g in enumerate(keep)}
    parent = np.array([-1] + [local[x] for x, _ in edges], dtype=np.int64)
    children = [[] for _ in keep]
    for x, y in edges:
        children[local[x]].append(local[y])
    for ch in children:
        ch.sort(key=lambda c: tree.tau[keep[c]])
    tau = np.array([math.nan] + [tree.tau[y] for _, y in edges])
    return SampledTree(parent, tau, np.array([T[g] for g in keep]), np.array([tree.d[g] for g in keep]), children)
