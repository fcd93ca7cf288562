"""Degree-constraint distributions on {2, ..., Delta}."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class DistributionError(ValueError):
    pass


@dataclass(frozen=True)
class DegreeDistribution:
    """Law of the per-vertex degree constraint.

    ``pmf[k]`` is the probability of constraint ``k`` for ``k = 0..delta_max``
    (entries below 2 are zero). ``tail[k] = sum_{j >= k} pmf[j]`` for
    ``k = 0..delta_max + 1``, so ``tail[1] = tail[2] = 1`` and
    ``tail[delta_max + 1] = 0``.
    """

    pmf: np.ndarray
    delta_max: int
    tail: np.ndarray = field(repr=False)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.pmf > 0)

    def p(self, k: int) -> float:
        if 0 <= k <= self.delta_max:
            return float(self.pmf[k])
        return 0.0

    def q(self, k: int) -> float:
        if k <= 0:
            return 1.0
        if k > self.delta_max:
            return 0.0
        return float(self.tail[k])

    def mean(self) -> float:
        return float(np.dot(np.arange(self.delta_max + 1), self.pmf))

    def inv_factorial_moment(self) -> float:
        """E(1/D!)."""
        return float(sum(self.pmf[k] / math.factorial(k) for k in self.support))

    def sample(self, rng: np.random.Generator, size=None):
        ks = self.support
        if len(ks) == 1:
            if size is None:
                return int(ks[0])
            return np.full(size, ks[0], dtype=np.int64)
        cdf = np.cumsum(self.pmf[ks])
        u = rng.random(size)
        idx = np.searchsorted(cdf, u * cdf[-1], side="right")
        idx = np.minimum(idx, len(ks) - 1)
        out = ks[idx]
        if size is None:
            return int(out)
        return out.astype(np.int64)

    def spec_string(self) -> str:
        return ",".join(f"{k}:{self.pmf[k]:.12g}" for k in self.support)

    def __eq__(self, other):
        if not isinstance(other, DegreeDistribution):
            return NotImplemented
        return self.delta_max == other.delta_max and np.array_equal(self.pmf, other.pmf)

    def __hash__(self):
        return hash((self.delta_max, self.pmf.tobytes()))


def from_pmf(entries) -> DegreeDistribution:
    """Build a distribution from ``(k, weight)`` pairs or a ``{k: weight}`` map.

    Weights are normalised. Repeated ``k`` accumulate.
    """
    if isinstance(entries, dict):
        entries = list(entries.items())
    entries = [(int(k), float(w)) for k, w in entries]
    if not entries:
        raise DistributionError("empty degree distribution")
    for k, w in entries:
        if k < 2:
            raise DistributionError(f"degree constraints must be >= 2, got k={k}")
        if w < 0 or not math.isfinite(w):
            raise DistributionError(f"invalid weight {w} for k={k}")
    total = sum(w for _, w in entries)
    if total <= 0:
        raise DistributionError("all weights are zero")
    delta = max(k for k, w in entries if w > 0)
    pmf = np.zeros(delta + 1)
    for k, w in entries:
        if k <= delta:
            pmf[k] += w
    pmf /= pmf.sum()
    tail = np.zeros(delta + 2)
    # backward summation keeps tail[k] - tail[k+1] == pmf[k] exactly
    for k in range(delta, -1, -1):
        tail[k] = tail[k + 1] + pmf[k]
    tail[: min(3, delta + 2)] = 1.0
    for k in range(delta, 1, -1):
        if tail[k] - tail[k + 1] != pmf[k]:
            pmf[k] = tail[k] - tail[k + 1]
    pmf.setflags(write=False)
    tail.setflags(write=False)
    return DegreeDistribution(pmf=pmf, delta_max=delta, tail=tail)


def point_mass(d: int) -> DegreeDistribution:
    return from_pmf([(d, 1.0)])


def parse_dist(text: str) -> DegreeDistribution:
    """Parse ``"3:1"`` or ``"2:0.5,4:0.5"``."""
    entries = []
    for i, part in enumerate(text.split(",")):
        part = part.strip()
        if not part:
            continue
        try:
            k, w = part.split(":")
            entries.append((int(k), float(w)))
        except ValueError:
            raise DistributionError(
                f"bad dist field {i + 1} {part!r}: expected k:weight"
            ) from None
    return from_pmf(entries)


def poisson_sum(lam, coeffs):
    """Evaluate ``exp(-lam) * sum_k lam^k / k! * coeffs[k]`` elementwise.

    Terms are accumulated as Poisson probabilities so large ``lam`` does not
    overflow.
    """
    lam = np.asarray(lam, dtype=float)
    coeffs = np.asarray(coeffs, dtype=float)
    term = np.exp(-lam)
    out = term * coeffs[0]
    for k in range(1, len(coeffs)):
        term = term * lam / k
        out = out + term * coeffs[k]
    return out
