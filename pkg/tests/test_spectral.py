import math

import numpy as np
import pytest

from rdcp.degree_dist import parse_dist, point_mass
from rdcp.ode import critical_time, solve_lambda
from rdcp.spectral import build_grid, dense_eigenvalue, eigenfunction_crosscheck, principal_eigenvalue


@pytest.fixture(scope="module")
def sol():
    return solve_lambda(point_mass(3), 1e-11)


@pytest.fixture(scope="module")
def t_c(sol):
    return critical_time(point_mass(3), sol=sol).t_hat_c


def test_kernel_symmetric_nonnegative(sol):
    g = build_grid(sol, 1.0, 500)
    assert np.array_equal(g.K, g.K.T)
    assert (g.K >= 0).all() and (g.weights >= 0).all()


def test_small_t_hat_kills_kernel(sol):
    assert build_grid(sol, 1e-12, 200).K.max() < 1e-6


def test_power_iteration_matches_dense(sol):
    for t in (0.5, 1.0, math.inf):
        g = build_grid(sol, t, 300)
        mu, v = principal_eigenvalue(g)
        assert mu == pytest.approx(dense_eigenvalue(g), rel=1e-10)
        assert (v > 0).all()


def test_mu_is_one_at_critical_time(sol, t_c):
    g = build_grid(sol, t_c, 1000)
    mu, _ = principal_eigenvalue(g)
    assert abs(mu - 1) < 5e-3


def test_refinement(sol, t_c):
    a = principal_eigenvalue(build_grid(sol, t_c, 2000))[0]
    b = principal_eigenvalue(build_grid(sol, t_c, 4000))[0]
    assert abs(a - b) < 1e-4


def test_mu_increases_with_t_hat(sol):
    mus = [principal_eigenvalue(build_grid(sol, 0.2 * (i + 1), 400))[0] for i in range(10)]
    assert all(a < b for a, b in zip(mus, mus[1:]))


def test_eigenfunction_solves_the_ode(sol, t_c):
    g = build_grid(sol, t_c, 1000)
    principal_eigenvalue(g)
    cc = eigenfunction_crosscheck(g, sol)
    assert cc.residual < 1e-2 and cc.boundary_residual < 1e-2
    w = cc.w_ode
    assert np.all(np.diff(w) > 0)
    slopes = np.diff(w) / np.diff(g.u[g.u <= t_c])
    assert np.all(np.diff(slopes) < 1e-9)


def test_mixture_critical_mu():
    dist = parse_dist("2:0.5,4:0.5")
    s = solve_lambda(dist, 1e-11)
    tc = critical_time(dist, sol=s).t_hat_c
    assert abs(principal_eigenvalue(build_grid(s, tc, 1000))[0] - 1) < 5e-3


def test_grid_size_floor(sol):
    with pytest.raises(ValueError):
        build_grid(sol, 1.0, 50)
