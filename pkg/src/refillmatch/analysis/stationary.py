"""Stationary budget distribution of the fluid system and the resulting CR bound."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fluid import g_of
from .special import bisect, lambert_w_exp

Z0_MAX = 1.0 - 1e-12


@dataclass
class StationaryPoint:
    z0_star: float
    g_star: float
    profile: np.ndarray  # z_k* for k = 0..K
    residual: float
    a: float
    beta: float
    K: int

    @property
    def ratio(self) -> float:
        return self.beta / self.g_star

    @property
    def ratio_ok(self) -> bool:
        """``beta / g* <= 1``, needed for the profile to stay geometric as K grows."""
        return self.ratio <= 1.0

    @property
    def mean_budget(self) -> float:
        return float(np.dot(np.arange(self.K + 1), self.profile))

    def to_dict(self) -> dict:
        return {"a": self.a, "beta": self.beta, "K": self.K, "z0_star": self.z0_star,
                "g_star": self.g_star, "profile": self.profile.tolist(),
                "residual": self.residual, "ratio": self.ratio, "ratio_ok": self.ratio_ok}


def _log_geometric_sum(x: float, K: int) -> float:
    """``log sum_{k=0}^K x^k`` without overflow for large ``K`` and ``x > 1``."""
    if x == 1.0:
        return math.log(K + 1.0)
    if x < 1.0:
        return math.log1p(-(x ** (K + 1))) - math.log1p(-x)
    lx = math.log(x)
    return K * lx + math.log1p(-math.exp(-(K + 1) * lx)) - math.log1p(-1.0 / x)


def _log_residual(y: float, a: float, beta: float, K: int) -> float:
    z0 = math.exp(y)
    return y + _log_geometric_sum(beta / g_of(z0, a), K)


def stationary_z0(a: float, beta: float, K: int) -> StationaryPoint:
    """Solve ``sum_k z0 (beta/g(z0))^k = 1`` by bisection.

    The unknown is ``log z0`` so that profiles with ``beta/g > 1`` and large ``K``,
    whose ``z0*`` underflows, stay finite.
    """
    if a <= 0 or beta <= 0 or K < 1:
        raise ValueError("need a > 0, beta > 0, K >= 1")
    lo = -(_log_geometric_sum(beta / g_of(0.0, a), K) + 1.0)
    y = bisect(lambda v: _log_residual(v, a, beta, K), lo, math.log(Z0_MAX), xtol=1e-16, ftol=1e-14)
    z0 = math.exp(y)
    g = g_of(z0, a)
    profile = np.exp(y + np.arange(K + 1) * math.log(beta / g))
    return StationaryPoint(z0, g, profile, abs(float(profile.sum()) - 1.0), a, beta, K)


def stationary_z0_K1(a: float, beta: float) -> float:
    """Closed form for K = 1: ``1/beta - W((a/beta) exp(-a (1 - 1/beta))) / a``."""
    if a <= 0 or beta <= 0:
        raise ValueError("need a, beta > 0")
    log_arg = math.log(a / beta) - a * (1.0 - 1.0 / beta)
    return 1.0 / beta - lambert_w_exp(log_arg) / a


def stationary_z0_Kinf(a: float, beta: float) -> float:
    """K -> infinity limit ``max(0, 1 + ln(1 - beta) / a)``; requires ``0 < beta < 1``.

    For ``beta >= 1 - exp(-a)`` refills outpace matching even with no empty node,
    the profile grows with ``k`` and ``z0*`` vanishes as K grows.
    """
    if not 0 < beta < 1:
        raise ValueError("the K -> infinity limit needs 0 < beta < 1")
    return max(0.0, 1.0 + math.log1p(-beta) / a)


def stability_rate(a: float, beta: float) -> float:
    """Exponential rate ``beta (1 + W(exp(-a (1 - 1/beta))))`` of the K = 1 system."""
    return beta * (1.0 + lambert_w_exp(-a * (1.0 - 1.0 / beta)))


def mean_budget_formula(g: float, beta: float, K: int) -> float:
    """``beta/(g-beta) - (K+1) beta^(K+1) / (g^(K+1) - beta^(K+1))``.

    This is the mean of the truncated geometric profile. It has a removable
    singularity at ``g = beta`` where it equals ``K / 2``.
    """
    x = beta / g
    if abs(1.0 - x) < 1e-6:
        return K / 2.0
    return x / (1.0 - x) - (K + 1) * x ** (K + 1) / (1.0 - x ** (K + 1))


def cr_lower_bound(T: float, K: int, n: float, b0: int, beta: float, a: float,
                   point: StationaryPoint | None = None) -> float:
    """Lower bound on Greedy's stochastic CR, without the ``O(T^-1/4)`` term.

    The bracketed term is evaluated as the mean stationary budget
    ``sum_k k z_k*``, which equals the closed form and has no pole at ``g* = beta``.
    """
    sp = point or stationary_z0(a, beta, K)
    num = T * sp.g_star * (1.0 - sp.z0_star) + n * b0 - n * sp.mean_budget
    return num / (n * b0 + beta * T)


def cr_limit(a: float, beta: float, K: int) -> float:
    """``T -> infinity`` value ``g* (1 - z0*) / beta``."""
    sp = stationary_z0(a, beta, K)
    return sp.g_star * (1.0 - sp.z0_star) / beta
