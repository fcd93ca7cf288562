"""Discretized branching operator and its principal eigenvalue.

The operator acts as ``(B g)(u) = int K(u, s) g(s) rho(s) ds`` with kernel
``K(u, s) = a(u) a(s) min(t_hat, u, s)`` and ``a = E / lambda``. It is
self-adjoint in ``L2(rho)``, so on quadrature nodes ``sqrt(w) K sqrt(w)`` is a
symmetric matrix with the same spectrum.

Quadrature runs in lambda-space: ``rho(s) ds = lambda pi(lambda) / E d lambda``
is smooth there, while in ``t`` the tail is stretched exponentially. Nodes are
uniform in lambda, which clusters them near ``t = 0`` where ``a`` blows up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from rdcp.degree_dist import poisson_sum
from rdcp.ode import LambdaSolution

TAIL_MASS = 1e-8


class NotConverged(RuntimeError):
    pass


@dataclass
class KernelGrid:
    t_hat: float
    lam: np.ndarray
    u: np.ndarray
    weights: np.ndarray
    a: np.ndarray
    K: np.ndarray = field(repr=False)
    mu: float | None = None
    v: np.ndarray | None = field(default=None, repr=False)
    iters: int = 0

    @property
    def G(self) -> int:
        return len(self.u)

    def symmetric_matrix(self) -> np.ndarray:
        r = np.sqrt(self.weights)
        return r[:, None] * self.K * r[None, :]


def tail_lambda(sol: LambdaSolution, mass: float = TAIL_MASS) -> float:
    """Smallest lambda with ``int_t^inf H < mass``."""
    tail = sol._c["h_tail"]
    lo, hi = 0.0, 1.0
    while float(poisson_sum(hi, tail)) >= mass:
        lo, hi = hi, 2 * hi
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if float(poisson_sum(mid, tail)) >= mass:
            lo = mid
        else:
            hi = mid
    return hi


def build_grid(sol: LambdaSolution, t_hat: float, G: int = 2000, tail_mass: float = TAIL_MASS) -> KernelGrid:
    if G < 100:
        raise ValueError("G must be at least 100")
    if not t_hat > 0:
        raise ValueError("t_hat must be positive")
    lam_max = tail_lambda(sol, tail_mass)
    h = lam_max / G
    lam = h * np.arange(1, G + 1)
    u = sol.time_of_lambda(lam)
    E = sol.E_of_lambda(lam)
    pi = poisson_sum(lam, sol._c["pi"])
    weights = lam * pi / E * h
    weights[-1] *= 0.5
    a = E / lam
    m = np.minimum(u[:, None], u[None, :])
    if math.isfinite(t_hat):
        m = np.minimum(m, t_hat)
    K = a[:, None] * a[None, :] * m
    if not np.array_equal(K, K.T):
        raise AssertionError("kernel matrix is not symmetric")
    if np.any(K < 0) or np.any(weights < 0):
        raise AssertionError("negative kernel value or weight")
    return KernelGrid(t_hat, lam, u, weights, a, K)


def principal_eigenvalue(grid: KernelGrid, tol: float = 1e-12, max_iters: int = 10_000):
    """Power iteration from the all-ones vector; returns ``(mu, v)``.

    ``v`` lives on the nodes in function space (``v = y / sqrt(w)``), is
    positive and normalised to ``max v = 1``.
    """
    S = grid.symmetric_matrix()
    y = np.ones(grid.G)
    y /= np.linalg.norm(y)
    mu = 0.0
    for it in range(1, max_iters + 1):
        z = S @ y
        new_mu = float(y @ z)
        y = z / np.linalg.norm(z)
        if abs(new_mu - mu) < tol * max(1.0, abs(new_mu)):
            mu = new_mu
            break
        mu = new_mu
    else:
        raise NotConverged(f"power iteration did not converge in {max_iters} iterations")
    v = y / np.sqrt(grid.weights)
    v /= v.max()
    grid.mu, grid.v, grid.iters = mu, v, it
    return mu, v


def dense_eigenvalue(grid: KernelGrid) -> float:
    return float(np.linalg.eigvalsh(grid.symmetric_matrix())[-1])


@dataclass
class CrossCheck:
    residual: float
    boundary_residual: float
    w_nodes: np.ndarray = field(repr=False)
    w_ode: np.ndarray = field(repr=False)


def eigenfunction_crosscheck(grid: KernelGrid, sol: LambdaSolution) -> CrossCheck:
    """Compare ``lambda v / E`` with the solution of ``mu w'' = -H w``.

    Both are scaled to ``w'(0) = 1``; the discrete one by matching the ODE at
    the first node. Reports the largest relative deviation over nodes
    ``<= t_hat`` and ``|mu w'(t_hat) - w(t_hat)(1 - int_0^t_hat H)|``.
    For ``t_hat = inf`` the last tenth of the lambda range is left out of the
    deviation, since cutting the domain at ``u_max`` bends the discrete
    eigenfunction there; the boundary term is then taken at the cut.
    """
    if grid.mu is None:
        raise ValueError("run principal_eigenvalue first")
    mu = grid.mu
    c = sol._c
    t_hat = grid.t_hat if math.isfinite(grid.t_hat) else float(grid.u[-1])

    def rhs(t, y):
        lam, w, wp = y
        H = poisson_sum(lam, c["psi"]) * poisson_sum(lam, c["h"])
        return np.array([poisson_sum(lam, c["psi"]), wp, -H * w / mu])

    inside = grid.u <= t_hat
    if not math.isfinite(grid.t_hat):
        inside &= grid.lam <= 0.9 * grid.lam[-1]
    ts = grid.u[inside]
    res = solve_ivp(rhs, (0.0, t_hat), [0.0, 0.0, 1.0], method="DOP853", rtol=1e-12, atol=1e-14, dense_output=True)
    w_ode = res.sol(ts)[1]
    w_disc = grid.v[inside] / grid.a[inside]
    w_disc = w_disc * (w_ode[0] / w_disc[0])
    rel = np.abs(w_disc - w_ode) / np.abs(w_ode)
    lam_end, w_end, wp_end = res.sol(t_hat)
    h_int = 1.0 - float(poisson_sum(lam_end, c["h_tail"]))
    boundary = abs(mu * wp_end - w_end * (1.0 - h_int))
    return CrossCheck(float(rel.max()), float(boundary), w_disc, w_ode)
