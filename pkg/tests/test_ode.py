import math

import numpy as np
import pytest
from scipy.integrate import quad

from rdcp.degree_dist import parse_dist, point_mass
from rdcp.ode import HorizonError, critical_time, eval_derived, gamma, solve_W, solve_lambda


@pytest.fixture(scope="module")
def sol2():
    return solve_lambda(point_mass(2), 1e-13)


@pytest.fixture(scope="module")
def sol3():
    return solve_lambda(point_mass(3), 1e-11)


@pytest.fixture(scope="module")
def mix():
    return solve_lambda(parse_dist("2:0.5,4:0.5"), 1e-11)


# For p_2 = 1, lambda' = exp(-l)(1 + l) = 1 - l^2/2 + l^3/3 - l^4/8 + ..., which
# gives lambda = t - t^3/6 + t^4/12 + t^5/120 + O(t^6) and, squaring lambda',
# F = t - t^3/3 + t^4/6 + t^5/15 + O(t^6).
def test_taylor_series(sol2):
    t = 0.05
    assert abs(float(sol2.lam(t)) - (t - t**3 / 6 + t**4 / 12 + t**5 / 120)) < 1e-9
    assert abs(float(sol2.big_F(t)) - (t - t**3 / 3 + t**4 / 6 + t**5 / 15)) < 4e-9


def test_psi_closed_form(sol2):
    lam = np.linspace(0, 10, 11)
    assert np.allclose(sol2.psi(lam), np.exp(-lam) * (1 + lam), rtol=1e-14)


def test_initial_values(sol3, mix):
    for s in (sol3, mix):
        assert float(s.lam(0.0)) == 0.0
        assert abs(float(s.lam_prime(0.0)) - 1) < 1e-12
    assert float(mix.H(0.0)) == pytest.approx(0.5)
    assert float(mix.E(0.0)) == pytest.approx(1.0)
    assert float(sol3.E(0.0)) == pytest.approx(2.0)
    assert float(sol3.H(0.0)) == 0.0


def test_f_is_minus_second_derivative(mix):
    h = 1e-4
    for t in (0.3, 1.0, 2.5):
        second = (mix.lam_prime(t + h) - mix.lam_prime(t - h)) / (2 * h)
        assert float(mix.f(t)) == pytest.approx(-float(second), rel=1e-6)


def test_H_integral_closed_form(mix):
    for t in (0.5, 1.5, 4.0):
        num = quad(lambda s: float(mix.H(s)), 0, t, epsabs=1e-13)[0]
        assert float(mix.H_cdf(t)) == pytest.approx(num, abs=1e-9)


def test_densities_integrate_to_one(sol3):
    assert 1 - float(sol3.cdf_root_type(sol3.horizon)) < 1e-7
    assert float(sol3.H_cdf(sol3.horizon)) > 1 - 1e-7


def test_E_matches_z_ratio(mix):
    t = 0.8
    zs = np.array([float(mix.z(k, t)) for k in range(0, 5)])
    assert float(mix.E(t)) == pytest.approx((np.arange(5) * zs).sum() / zs.sum(), rel=1e-12)
    assert float(eval_derived(mix, t, "z_k", k=1)) == zs[1]
    assert float(eval_derived(mix, t, "rho")) == pytest.approx(float(mix.lam(t) * mix.f(t) / mix.E(t)))
    with pytest.raises(ValueError):
        eval_derived(mix, t, "nope")


def test_F_limit_and_inverse(sol3):
    assert abs(float(sol3.big_F(sol3.horizon)) - 3.0) < 1e-3
    for t in (0.1, 0.75, 2.0):
        assert sol3.big_F_inverse(float(sol3.big_F(t))) == pytest.approx(t, abs=1e-10)
    with pytest.raises(ValueError):
        sol3.big_F_inverse(3.0)


def test_extension_keeps_earlier_values():
    s = solve_lambda(point_mass(3), 1e-10, cutoff=1e-3)
    before = float(s.lam(1.0))
    h = s.horizon
    far = float(s.lam(h * 10))
    assert s.horizon >= h * 10 and far > float(s.lam(h))
    assert float(s.lam(1.0)) == before
    s.auto_extend = False
    with pytest.raises(HorizonError):
        s.lam(s.horizon * 2)


def test_abs_tol_range():
    with pytest.raises(ValueError):
        solve_lambda(point_mass(3), 1e-3)


def test_W_properties(sol3):
    w = solve_W(sol3)
    assert 4.0 < w.theta < 4.2
    ts = np.linspace(1e-3, w.theta - 1e-3, 400)
    W, Wp = w(ts)
    assert np.all(W > 0) and np.all(Wp > 0)
    assert np.all(np.diff(Wp) <= 1e-12)
    g = gamma(sol3, w, ts)
    assert float(gamma(sol3, w, 0.0)) == pytest.approx(1.0)
    assert np.all(np.diff(g) < 0)


def test_critical_time_d3(sol3):
    r = critical_time(point_mass(3), sol=sol3)
    assert r.t_hat_c == pytest.approx(1.2437846355, abs=1e-9)
    assert 0 < r.t_c < 1.5
    assert r.t_c == pytest.approx(float(sol3.big_F(r.t_hat_c)) / 2)
    assert r.J == pytest.approx(1 - float(sol3.lam(1.0)))
    assert not r.flags


def test_critical_time_flags():
    assert "no_critical_time" in critical_time(point_mass(2)).flags
    r = critical_time(point_mass(12))
    assert "below_resolution" in r.flags and math.isnan(r.ratio)
    r8 = critical_time(point_mass(8))
    assert 0.8 <= r8.ratio <= 1.2
