import math

import numpy as np
import pytest
from scipy.stats import kstest

from rdcp.canonical import census, tv_distance
from rdcp.degree_dist import parse_dist, point_mass
from rdcp.exploration import pwit_codes
from rdcp.limit_sampler import (
    MtbpSampler,
    StreamExhausted,
    mtbp_codes,
    mtbp_component,
    pwit_explore,
    rde_chi,
)
from rdcp.ode import critical_time, solve_lambda


@pytest.fixture(scope="module")
def s3():
    return MtbpSampler(solve_lambda(point_mass(3), 1e-11))


@pytest.fixture(scope="module")
def smix():
    return MtbpSampler(solve_lambda(parse_dist("2:0.5,4:0.5"), 1e-11))


def test_rde_chi_examples():
    assert rde_chi([1, 2, 3], 2, [10, 10, 10]) == 2
    assert rde_chi([1, 2, 3], 2, [0.5, 10, 10]) == 3
    with pytest.raises(StreamExhausted):
        rde_chi([1, 2], 3, [10, 10])


def test_time_table_matches_solution(s3):
    lam = np.array([0.01, 0.5, 2.0, 8.0])
    t = s3.t_of(lam)
    assert np.allclose(s3.sol.lam(t), lam, rtol=1e-10)


def test_root_type_law(s3):
    _, T = s3.root_types(100_000, np.random.default_rng(0))
    stat = kstest(T, lambda x: np.asarray(s3.sol.cdf_root_type(np.maximum(x, 0)))).statistic
    assert stat < 0.01


def test_root_constraint(s3, smix):
    rng = np.random.default_rng(1)
    lam, _ = s3.root_types(1000, rng)
    assert np.all(s3.constraints(lam, rng) == 3)
    small = np.full(10_000, 1e-4)
    assert np.mean(smix.constraints(small, rng) == 2) > 0.999
    big = np.full(10_000, 30.0)
    assert np.mean(smix.constraints(big, rng) == 4) > 0.99


def test_constraint_law_matches_z_ratio(smix):
    rng = np.random.default_rng(2)
    t0 = 1.3
    lam = np.full(100_000, float(smix.sol.lam(t0)))
    d = smix.constraints(lam, rng)
    want = smix.sol.constraint_pmf(t0)
    assert abs(np.mean(d == 4) - want[4]) < 0.005


def test_last_child_law(s3):
    t0 = 0.7
    lam0 = np.full(100_000, float(s3.sol.lam(t0)))
    _, s = s3.last_child(lam0, np.random.default_rng(3))
    lp0 = float(s3.sol.lam_prime(t0))
    assert np.all(s > t0)
    cdf = lambda x: (lp0 - np.asarray(s3.sol.lam_prime(np.maximum(x, t0)))) / lp0  # noqa: E731
    assert kstest(s, cdf).statistic < 0.01


def test_pairs_support_and_marginal(s3):
    t0 = 0.9
    n = 100_000
    lam0 = np.full(n, float(s3.sol.lam(t0)))
    tau, _, s = s3.pairs(lam0, np.full(n, t0), np.random.default_rng(4))
    assert np.all(tau <= t0) and np.all(tau <= s)
    l0 = float(s3.sol.lam(t0))

    def cdf(x):
        x = np.asarray(x, dtype=float)
        lo = (s3.sol.lam(np.minimum(x, t0)) - np.minimum(x, t0) * s3.sol.lam_prime(np.minimum(x, t0))) / l0
        hi = (l0 - t0 * s3.sol.lam_prime(np.maximum(x, t0))) / l0
        return np.where(x <= t0, lo, hi)

    assert kstest(s, cdf).statistic < 0.01


def test_zero_time_gives_root_only(s3):
    t = mtbp_component(s3, 0.0, np.random.default_rng(5))
    assert len(t) == 1 and t.code() == b"()"


def test_component_invariants(s3):
    rng = np.random.default_rng(6)
    forest = s3.forest(2000, 0.9, rng)
    for i in range(0, 2000, 37):
        forest.tree(i).check(0.9)


def test_full_time_root_degree_is_d(s3):
    f = s3.forest(5000, math.inf, np.random.default_rng(7), max_depth=1)
    assert np.all(f.sizes() == 4)


def test_subcritical_mean_size_stable(s3):
    t_hat = 0.8 * critical_time(point_mass(3), sol=s3.sol).t_hat_c
    a = s3.forest(50_000, t_hat, np.random.default_rng(8), max_nodes=2000)
    b = s3.forest(50_000, t_hat, np.random.default_rng(8), max_nodes=4000)
    assert not a.truncated.any()
    assert a.sizes().mean() == b.sizes().mean()
    assert a.sizes().mean() < 10


def test_caps_flag_truncation(s3):
    f = s3.forest(200, math.inf, np.random.default_rng(9), max_nodes=20)
    assert f.truncated.any()


def test_two_samplers_agree(s3):
    rng = np.random.default_rng(10)
    a = census(mtbp_codes(s3, 0.6, 2, 20_000, rng))
    b = census(pwit_codes(point_mass(3), 0.6, 2, 20_000, rng))
    assert tv_distance(a, b) < 0.025


def test_pwit_explore_respects_child_caps():
    rng = np.random.default_rng(11)
    for _ in range(300):
        t = pwit_explore(point_mass(3), 1.2, 2, rng)
        t.check(1.2)
        assert len(t.children[0]) <= 3
        assert all(len(ch) <= 2 for ch in t.children[1:])
