"""Experiment building blocks shared by the command line and the self-test."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from rdcp.canonical import census, tv_distance
from rdcp.degree_dist import DegreeDistribution
from rdcp.host_graph import HostGraph
from rdcp.limit_sampler import MtbpSampler, mtbp_codes
from rdcp.exploration import pwit_codes
from rdcp.ode import LambdaSolution
from rdcp.simulate import assign_constraints, simulate


def replica_rng(seed: int, stream: int, index: int) -> np.random.Generator:
    """Generator for replica ``index`` of experiment ``stream``.

    Streams are derived from ``SeedSequence([seed, stream, index])``, so a
    replica's draws do not depend on the thread that runs it.
    """
    return np.random.default_rng(np.random.SeedSequence([seed, stream, index]))


def thread_count(requested: int | None = None) -> int:
    env = os.environ.get("RDCP_THREADS")
    if env:
        return max(1, int(env))
    if requested:
        return max(1, requested)
    return os.cpu_count() or 1


def fan_out(fn, items, threads: int | None = None) -> list:
    """``[fn(x) for x in items]`` over a thread pool; results keep input order."""
    items = list(items)
    threads = thread_count(threads)
    if threads == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def mean_se(values) -> tuple:
    x = np.asarray(values, dtype=float)
    if len(x) < 2:
        return float(x.mean()), math.nan
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(len(x)))


def run_replica(host: HostGraph, dist: DegreeDistribution, stop, rng, snapshot_times=None):
    cons = assign_constraints(host, dist, rng)
    return simulate(host, cons, stop, rng, snapshot_times=snapshot_times)


def vertex_census(state, R: int) -> dict:
    """Census of radius-``R`` balls over every vertex of a simulated graph."""
    return census(state.neighborhood(v, R) for v in range(state.n_vertices))


def limit_census(sampler, t_hat: float, R: int, n: int, rng, method: str = "mtbp") -> dict:
    if method == "mtbp":
        return census(mtbp_codes(sampler, t_hat, R, n, rng))
    if method == "pwit":
        return census(pwit_codes(sampler.dist, t_hat, R, n, rng))
    raise ValueError(f"unknown limit sampler {method!r}")


def census_rows(c: dict) -> list:
    return [(code.hex(), freq) for code, freq in c.items()]


def compare_censuses(sim: dict, lim: dict) -> float:
    return tv_distance(sim, lim)


def largest_fractions(host_factory, dist, t: float, seeds, seed: int, stream: int, threads=None) -> np.ndarray:
    """Largest component fraction at time ``t`` for each replica index in ``seeds``."""
    from rdcp.simulate import UntilTime

    def one(i):
        rng = replica_rng(seed, stream, i)
        host = host_factory()
        st = run_replica(host, dist, UntilTime(t), rng)
        return st.component_stats().largest / host.n_vertices

    return np.array(fan_out(one, seeds, threads))


def sampler_for(sol: LambdaSolution) -> MtbpSampler:
    return MtbpSampler(sol)
