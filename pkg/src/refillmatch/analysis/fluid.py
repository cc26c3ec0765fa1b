"""Fluid limit of Greedy on Erdos-Renyi instances with Bernoulli refills.

``z_k(tau)`` is the fraction of offline nodes with budget ``k`` at rescaled time
``tau = t / n`` and ``h(tau)`` the matched mass per offline node.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

POLE_GUARD = 1e-12
SERIES_BELOW = 1e-8


class SingularityError(ArithmeticError):
    """Evaluation too close to ``z0 = 1`` (no available node)."""


def g_of(z0: float, a: float) -> float:
    """``(1 - exp(-a (1 - z0))) / (1 - z0)``; tends to ``a`` as ``z0 -> 1``."""
    x = 1.0 - z0
    if x <= 0.0:
        raise SingularityError(f"g undefined at z0 = {z0}")
    if x < SERIES_BELOW:
        # six terms of sum_j (-1)^j a^(j+1) x^j / (j+1)!
        return a * (1.0 - a * x / 2.0 * (1.0 - a * x / 3.0 * (1.0 - a * x / 4.0
                    * (1.0 - a * x / 5.0 * (1.0 - a * x / 6.0)))))
    return -math.expm1(-a * x) / x


def ode_rhs(z, a: float, beta: float) -> np.ndarray:
    """Drift of ``(z_0, ..., z_K)``; the components sum to zero."""
    z = np.asarray(z, dtype=float)
    if z.size < 2:
        raise ValueError("need K >= 1")
    if z[0] >= 1.0 - POLE_GUARD:
        raise SingularityError(f"z0 = {z[0]} at the pole")
    g = g_of(z[0], a)
    out = np.empty_like(z)
    out[0] = -beta * z[0] + g * z[1]
    out[1:-1] = beta * (z[:-2] - z[1:-1]) + g * (z[2:] - z[1:-1])
    out[-1] = beta * z[-2] - g * z[-1]
    return out


@dataclass
class OdeSolution:
    tau: np.ndarray
    z: np.ndarray  # shape (len(tau), K + 1)
    h: np.ndarray
    a: float
    beta: float
    K: int
    dt: float

    def z_at(self, tau) -> np.ndarray:
        """Linear interpolation of every ``z_k`` at the given times."""
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        return np.stack([np.interp(tau, self.tau, self.z[:, k]) for k in range(self.K + 1)], axis=1)

    def h_at(self, tau) -> np.ndarray:
        return np.interp(np.asarray(tau, dtype=float), self.tau, self.h)


def default_init(K: int, b0: int) -> np.ndarray:
    if not 0 <= b0 <= K:
        raise ValueError(f"b0={b0} outside 0..K={K}")
    z = np.zeros(K + 1)
    z[b0] = 1.0
    return z


def integrate(init=None, a: float = 2.0, beta: float = 0.5, K: int = 1, tau_end: float = 1.0,
              dt: float = 1e-3, b0: int = 1) -> OdeSolution:
    """Classical RK4 on ``(z, h)`` from ``tau = 0``; the grid always ends at ``tau_end``."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    z = default_init(K, b0) if init is None else np.array(init, dtype=float)
    if z.size != K + 1:
        raise ValueError(f"init has {z.size} entries, expected K+1 = {K + 1}")
    if abs(z.sum() - 1.0) > 1e-9 or (z < -1e-12).any():
        raise ValueError("init must lie on the simplex")
    steps = max(1, math.ceil(tau_end / dt - 1e-9))
    taus = np.empty(steps + 1)
    zs = np.empty((steps + 1, K + 1))
    hs = np.empty(steps + 1)
    taus[0], zs[0], hs[0] = 0.0, z, 0.0
    h, tau = 0.0, 0.0

    def f(zz):
        return ode_rhs(zz, a, beta), -math.expm1(-a * (1.0 - zz[0]))

    for i in range(1, steps + 1):
        step = min(dt, tau_end - tau) if i == steps else dt
        k1, q1 = f(z)
        k2, q2 = f(z + 0.5 * step * k1)
        k3, q3 = f(z + 0.5 * step * k2)
        k4, q4 = f(z + step * k3)
        z = z + step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        h += step / 6.0 * (q1 + 2.0 * q2 + 2.0 * q3 + q4)
        tau = tau_end if i == steps else tau + step
        taus[i], zs[i], hs[i] = tau, z, h
    return OdeSolution(taus, zs, hs, a, beta, K, dt)


def greedy_drift(Y0: int, n: int, a: float) -> float:
    """Probability that the next arrival is matched when ``Y0`` nodes are empty."""
    if not 0 <= Y0 <= n or a > n:
        raise ValueError("need 0 <= Y0 <= n and a <= n")
    if a == n:
        return 0.0 if Y0 == n else 1.0
    return -math.expm1((n - Y0) * math.log1p(-a / n))


def sigma(C: int, p: float) -> float:
    """``(1 - (1-p)^C) / (p C)``: chance a given available node is picked, divided by p."""
    if C < 1 or not 0 < p <= 1:
        raise ValueError("need C >= 1 and 0 < p <= 1")
    if p == 1.0:
        return 1.0 / C
    return -math.expm1(C * math.log1p(-p)) / (p * C)


def wormald_bound(n: int, T: int, a: float, eps: float = 0.1) -> float:
    """``3 exp(L' T / n) a n^(3/4)`` with ``L' = a exp(a eps)``."""
    if eps <= 0:
        raise ValueError("eps > 0")
    lip = a * math.exp(a * eps)
    return 3.0 * math.exp(lip * T / n) * a * n**0.75
