"""The lambda initial value problem, its derived functions, and the critical time.

``lambda'(t) = Psi(lambda(t))`` with ``Psi(l) = exp(-l) sum_k l^k/k! q_{k+1}``
and ``lambda(0) = 0``. Every other scalar function is a closed form in
``lambda(t)``: with ``X ~ Poisson(lambda(t))`` and ``D ~ p`` independent,

* ``lambda'(t) = P(X < D)``, the chance the limit root is still unsaturated,
* ``f(t) = -lambda''(t) = lambda'(t) P(X = D - 1)``, the density of the root's
  phantom saturation time,
* ``H(t) = lambda'(t) P(X = D - 2)`` with ``int_0^t H = P(X >= D - 1)``,
* ``E(t)`` the mean number of children of a non-root vertex of type ``t``,
* ``rho = lambda f / E`` and ``F(t) = int_0^t lambda'(s)^2 ds``.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import bisect

from rdcp.degree_dist import DegreeDistribution, poisson_sum

DEFAULT_CUTOFF = 1e-8
DEFAULT_T_CAP = 1e18
RESOLUTION_FLOOR = 1e-6
ROOT_XTOL = 1e-12


class HorizonError(RuntimeError):
    pass


class SolverResolutionError(RuntimeError):
    pass


def _coefficients(dist: DegreeDistribution):
    delta = dist.delta_max
    p = np.zeros(delta + 3)
    p[: delta + 1] = dist.pmf
    q = np.zeros(delta + 3)
    q[: delta + 2] = dist.tail
    q[0] = q[1] = 1.0
    return {
        # Psi: coefficient k multiplies l^k/k!, k = 0..delta-1
        "psi": q[1 : delta + 1].copy(),
        "pi": p[1 : delta + 1].copy(),  # P(X = D - 1)
        "h": p[2 : delta + 2].copy(),  # P(X = D - 2)
        "h_tail": q[2 : delta + 2].copy(),  # P(X <= D - 2)
    }


class LambdaSolution:
    """Dense solution of the lambda IVP with derived evaluators.

    Values inside the solved horizon never change; asking for a time beyond
    the horizon extends the integration (``auto_extend``) or raises
    ``HorizonError``.
    """

    def __init__(self, dist, abs_tol, cutoff=DEFAULT_CUTOFF, t_cap=DEFAULT_T_CAP, auto_extend=True):
        if not 1e-13 <= abs_tol <= 1e-6:
            raise ValueError(f"abs_tol must lie in [1e-13, 1e-6], got {abs_tol}")
        self.dist = dist
        self.abs_tol = abs_tol
        self.rtol = max(abs_tol, 1e-13)
        self.cutoff = cutoff
        self.t_cap = t_cap
        self.auto_extend = auto_extend
        self._c = _coefficients(dist)
        self._segments = []
        self._starts = []
        self._lock = threading.Lock()
        self.t_nodes = np.zeros(1)
        self.lam_nodes = np.zeros(1)
        self._integrate(0.0, np.array([0.0, 0.0]), cutoff, t_cap)

    # -- integration -----------------------------------------------------

    def psi(self, lam):
        return poisson_sum(lam, self._c["psi"])

    def _rhs(self, t, y):
        lp = self.psi(y[0])
        return np.array([lp, lp * lp])

    def _integrate(self, t0, y0, cutoff, t_end):
        event = lambda t, y: self.psi(y[0]) - cutoff  # noqa: E731
        event.terminal = True
        event.direction = -1
        res = solve_ivp(
            self._rhs,
            (t0, t_end),
            y0,
            method="DOP853",
            rtol=self.rtol,
            atol=self.abs_tol,
            dense_output=True,
            events=event,
        )
        if res.status == -1:
            raise SolverResolutionError(f"lambda integration failed: {res.message}")
        self._segments.append(res.sol)
        self._starts.append(t0)
        self.t_nodes = np.concatenate([self.t_nodes, res.t[1:]])
        self.lam_nodes = np.concatenate([self.lam_nodes, res.y[0, 1:]])
        self._end_state = res.y[:, -1]
        self.horizon = float(res.t[-1])

    def extend(self, cutoff=None, t_end=None) -> None:
        """Continue the integration to a smaller ``cutoff`` or to ``t_end``."""
        with self._lock:
            if t_end is not None and t_end <= self.horizon:
                return
            cutoff = self.cutoff if cutoff is None else cutoff
            if t_end is None:
                if self.psi(self._end_state[0]) <= cutoff:
                    return
                t_end = self.t_cap
            else:
                cutoff = 0.0
            if self.horizon >= self.t_cap:
                raise HorizonError(f"cannot extend past t_cap={self.t_cap}")
            self._integrate(self.horizon, self._end_state.copy(), cutoff, min(t_end, self.t_cap))
            if cutoff:
                self.cutoff = cutoff

    def _state(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise ValueError("negative time")
        tmax = float(np.max(t)) if t.size else 0.0
        if tmax > self.horizon:
            if not self.auto_extend:
                raise HorizonError(f"t={tmax} beyond solved horizon {self.horizon}")
            self.extend(t_end=tmax * 1.25)
        flat = t.ravel()
        out = np.empty((2, flat.size))
        seg = np.searchsorted(self._starts, flat, side="right") - 1
        seg = np.maximum(seg, 0)
        for i in np.unique(seg):
            m = seg == i
            out[:, m] = self._segments[i](flat[m]).reshape(2, -1)
        return out.reshape((2,) + t.shape)

    # -- evaluators ------------------------------------------------------

    def lam(self, t):
        return self._state(t)[0]

    def lam_prime(self, t):
        return self.psi(self.lam(t))

    def f(self, t):
        lam = self.lam(t)
        return self.psi(lam) * poisson_sum(lam, self._c["pi"])

    def H(self, t):
        lam = self.lam(t)
        return self.psi(lam) * poisson_sum(lam, self._c["h"])

    def H_cdf(self, t):
        """``int_0^t H``, exactly ``1 - P(Poisson(lambda(t)) <= D - 2)``."""
        return 1.0 - poisson_sum(self.lam(t), self._c["h_tail"])

    def E(self, t):
        return self.E_of_lambda(self.lam(t))

    def E_of_lambda(self, lam):
        """Mean child count ``sum k z_k / sum z_k``; finite limit at ``lam = 0``."""
        lam = np.asarray(lam, dtype=float)
        pi = self._c["pi"]
        k0 = int(np.flatnonzero(pi > 0)[0])
        num = np.zeros_like(lam)
        den = np.zeros_like(lam)
        # divide every term by lam^k0 / k0! so lam = 0 is regular
        for k in range(k0, len(pi)):
            if pi[k] == 0:
                continue
            w = pi[k] * lam ** (k - k0) * math.factorial(k0) / math.factorial(k)
            num = num + k * w
            den = den + w
        return num / den

    def rho(self, t):
        lam = self.lam(t)
        f = self.psi(lam) * poisson_sum(lam, self._c["pi"])
        return lam * f / self.E_of_lambda(lam)

    def z(self, k: int, t):
        """``exp(-lam) lam^k / k! p_{k+1}``."""
        lam = np.asarray(self.lam(t), dtype=float)
        p = self.dist.p(k + 1)
        return np.exp(-lam) * lam**k / math.factorial(k) * p

    def constraint_pmf(self, t0: float) -> np.ndarray:
        """Law of the constraint of a vertex of type ``t0``: index ``k`` holds
        ``z_{k-1} / sum_l z_l``."""
        lam = float(self.lam(t0))
        pi = self._c["pi"]
        k0 = int(np.flatnonzero(pi > 0)[0])
        w = np.zeros(self.dist.delta_max + 1)
        for k in range(k0, len(pi)):
            w[k + 1] = pi[k] * lam ** (k - k0) * math.factorial(k0) / math.factorial(k)
        return w / w.sum()

    def cdf_root_type(self, t):
        """CDF of the root type, ``1 - lambda'(t)``."""
        return 1.0 - self.lam_prime(t)

    def big_F(self, t):
        return self._state(t)[1]

    def big_F_inverse(self, s: float, xtol: float = 1e-13) -> float:
        mean = self.dist.mean()
        if not 0 <= s < mean:
            raise ValueError(f"F^-1(s) needs 0 <= s < E(D) = {mean}, got {s}")
        if s == 0:
            return 0.0
        hi = max(1.0, self.horizon)
        while float(self.big_F(hi)) < s:
            if hi >= self.t_cap:
                raise HorizonError(f"F never reaches {s} before t_cap")
            hi = min(hi * 4.0, self.t_cap)
        lo = 0.0
        while hi - lo > xtol * max(1.0, hi):
            mid = 0.5 * (lo + hi)
            if float(self.big_F(mid)) < s:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    def time_of_lambda(self, target) -> np.ndarray:
        """Inverse of ``lambda`` by bisection on the dense solution."""
        target = np.atleast_1d(np.asarray(target, dtype=float))
        while float(self._end_state[0]) < target.max():
            self.extend(t_end=self.horizon * 4.0)
        idx = np.searchsorted(self.lam_nodes, target)
        idx = np.clip(idx, 1, len(self.t_nodes) - 1)
        lo = self.t_nodes[idx - 1].copy()
        hi = self.t_nodes[idx].copy()
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            below = self.lam(mid) < target
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
            if np.all(hi - lo <= 1e-15 * np.maximum(1.0, hi)):
                break
        return 0.5 * (lo + hi)


def solve_lambda(dist: DegreeDistribution, abs_tol: float = 1e-10, cutoff=DEFAULT_CUTOFF, t_cap=DEFAULT_T_CAP) -> LambdaSolution:
    """Adaptive Runge-Kutta (DOP853) solution up to ``lambda' < cutoff``."""
    return LambdaSolution(dist, abs_tol, cutoff=cutoff, t_cap=t_cap)


def eval_derived(sol: LambdaSolution, t, which: str, k: int | None = None):
    funcs = {"f": sol.f, "H": sol.H, "E": sol.E, "rho": sol.rho}
    if which == "z_k":
        if k is None:
            raise ValueError("z_k needs k")
        return sol.z(k, t)
    if which not in funcs:
        raise ValueError(f"unknown derived function {which!r}")
    return funcs[which](t)


@dataclass
class WSolution:
    """``W'' = -H W`` with ``W(0) = 0``, ``W'(0) = 1``, solved alongside lambda."""

    t: np.ndarray
    W: np.ndarray
    W_prime: np.ndarray
    theta: float
    dense: object = field(repr=False)
    t_end: float = 0.0

    def __call__(self, t):
        y = self.dense(np.asarray(t, dtype=float))
        return y[1], y[2]


def solve_W(sol: LambdaSolution, t_end: float | None = None) -> WSolution:
    """Integrate the W system and locate ``theta``, the first zero of ``W'``.

    ``theta`` is ``inf`` when ``W'`` keeps its sign up to ``t_end``.
    """
    c = sol._c
    if t_end is None:
        t_end = min(sol.horizon, 1e4)

    def rhs(t, y):
        lam, W, Wp = y
        lp = poisson_sum(lam, c["psi"])
        return np.array([lp, Wp, -lp * poisson_sum(lam, c["h"]) * W])

    def w_prime_zero(t, y):
        return y[2]

    w_prime_zero.terminal = True
    w_prime_zero.direction = -1
    res = solve_ivp(
        rhs,
        (0.0, t_end),
        np.array([0.0, 0.0, 1.0]),
        method="DOP853",
        rtol=sol.rtol,
        atol=sol.abs_tol,
        dense_output=True,
        events=w_prime_zero,
    )
    if res.status == -1:
        raise SolverResolutionError(f"W integration failed: {res.message}")
    theta = math.inf
    if res.t_events[0].size:
        te = float(res.t_events[0][0])
        lo = res.t[-2] if len(res.t) > 1 else 0.0
        theta = bisect(lambda t: res.sol(t)[2], lo, te + 1e-9 * max(1, te), xtol=ROOT_XTOL) if res.sol(te + 1e-9 * max(1, te))[2] < 0 else te
    return WSolution(res.t, res.y[1], res.y[2], theta, res.sol, float(res.t[-1]))


def gamma(sol: LambdaSolution, wsol: WSolution, t):
    t = np.asarray(t, dtype=float)
    y = wsol.dense(t)
    lam, W, Wp = y[0], y[1], y[2]
    h_cdf = 1.0 - poisson_sum(lam, sol._c["h_tail"])
    return Wp - W * (1.0 - h_cdf)


@dataclass
class CriticalTimeReport:
    dist: str
    t_hat_c: float
    t_c: float
    theta: float
    delta: float
    I: float
    J: float
    asymptotic_ref: float
    ratio: float
    flags: tuple = ()
    mu_at_tc: float | None = None

    def row(self) -> dict:
        return {
            "dist": self.dist,
            "t_hat_c": self.t_hat_c,
            "t_c": self.t_c,
            "theta": self.theta,
            "delta": self.delta,
            "I": self.I,
            "J": self.J,
            "asymptotic_ref": self.asymptotic_ref,
            "ratio": self.ratio,
            "flags": ";".join(self.flags),
        }


def critical_time(dist: DegreeDistribution, abs_tol: float = 1e-11, sol: LambdaSolution | None = None, grid: int = 4001) -> CriticalTimeReport:
    """Continuous critical time as the root of gamma on ``[0, theta]``."""
    if sol is None:
        sol = solve_lambda(dist, abs_tol)
    flags = []
    asym = 2.0 / math.e * dist.inv_factorial_moment()
    delta = quad(lambda s: float(sol.H(s)) * (1.0 - s * s), 0.0, 1.0, epsabs=1e-15, epsrel=1e-12, limit=200)[0]
    I_ = float(sol.H_cdf(1.0 + 2.0 * delta))
    J = 1.0 - float(sol.lam(1.0))
    if dist.delta_max == 2:
        # constraint 2 everywhere: components are paths and cycles, no giant
        return CriticalTimeReport(dist.spec_string(), math.inf, dist.mean() / 2, math.inf, delta, I_, J, asym, math.nan, ("no_critical_time",))
    wsol = solve_W(sol)
    upper = wsol.theta if math.isfinite(wsol.theta) else wsol.t_end
    ts = np.linspace(0.0, upper, grid)
    g = gamma(sol, wsol, ts)
    if g[0] <= 0 or g[-1] >= 0:
        raise SolverResolutionError("gamma has no sign change on [0, theta]")
    if math.isfinite(wsol.theta) and np.any(np.diff(g) >= 0):
        raise SolverResolutionError("gamma is not strictly decreasing on [0, theta]")
    i = int(np.argmax(g < 0))
    t_hat_c = bisect(lambda t: float(gamma(sol, wsol, t)), ts[i - 1], ts[i], xtol=ROOT_XTOL, rtol=4 * np.finfo(float).eps)
    t_c = float(sol.big_F(t_hat_c)) / 2.0
    ratio = (t_hat_c - 1.0) / asym
    if asym < RESOLUTION_FLOOR:
        flags.append("below_resolution")
        ratio = math.nan
    return CriticalTimeReport(dist.spec_string(), t_hat_c, t_c, wsol.theta, delta, I_, J, asym, ratio, tuple(flags))
