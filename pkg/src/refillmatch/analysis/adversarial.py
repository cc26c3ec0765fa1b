"""Competitive-ratio bounds for the adversarial model and the discrete budget dynamics."""

from __future__ import annotations

import math
from fractions import Fraction

from .special import adaptive_simpson, bisect

QUAD_TOL = 1e-12


def _moment(power: int, alpha: float, shift: float | None = None) -> float:
    """``int_0^alpha x^power (shift - x)^[shift given] e^x / (1 - x) dx``."""
    if not 0 <= alpha < 1:
        raise ValueError(f"alpha = {alpha} must lie in [0, 1)")
    if shift is None:
        return adaptive_simpson(lambda x: x**power * math.exp(x) / (1.0 - x), 0.0, alpha, QUAD_TOL)
    return adaptive_simpson(lambda x: x**power * (shift - x) * math.exp(x) / (1.0 - x),
                            0.0, alpha, QUAD_TOL)


def solve_alpha(target: float = 0.5) -> float:
    """Root of ``int_0^alpha x e^x / (1 - x) dx = target`` on (0, 1)."""
    if target <= 0:
        raise ValueError("target > 0")
    # the integral diverges at 1, so the root exists for any positive target
    hi = 1.0 - 1e-3
    while _moment(1, hi) < target:
        hi = 1.0 - (1.0 - hi) / 10.0
        if 1.0 - hi < 1e-14:
            raise ArithmeticError("target too large")
    return bisect(lambda x: _moment(1, x) - target, 0.0, hi, xtol=1e-13)


def cr_bound_th2(alpha: float | None = None) -> float:
    """Asymptotic upper bound ``1 - (1 - alpha) e^-(1 - alpha)`` on Balance's ratio."""
    alpha = solve_alpha() if alpha is None else alpha
    return 1.0 - (1.0 - alpha) * math.exp(-(1.0 - alpha))


def cr_bound_th2_detailed(m: int, b0: int, t0: float) -> float:
    """Finite-parameter form of the same bound, with its own instance-level alpha."""
    if m < 2 or t0 < 1:
        raise ValueError("need m >= 2 and t0 >= 1")
    mb = m * b0
    alpha = solve_alpha(1.0 - t0 / (mb + 2.0 * t0))
    e = math.e
    return (1.0 - (mb + t0) / (e * (mb + 2.0 * t0)) - _moment(2, alpha) / e
            + (mb / t0) * (1.0 - 1.0 / e + _moment(1, alpha, shift=alpha) / e))


def cr_bound_th1(b0: int) -> Fraction:
    """``1 - 1 / (1 + 1/b0)^b0`` as an exact fraction."""
    if b0 < 1:
        raise ValueError("b0 >= 1")
    return 1 - Fraction(b0**b0, (b0 + 1) ** b0)


def z_total_recurrence(Z0: int, k: int, m: int, j: int, t: int) -> int:
    """``Z_t = Z_{t-1} - 1{Z_{t-1} >= 1} + k 1{t mod m = j}`` stepped directly."""
    Z = Z0
    for s in range(1, t + 1):
        Z = Z - (Z >= 1) + (k if s % m == j else 0)
    return Z


def z_total_closed_form(Z0: int, k: int, m: int, j: int, t: int) -> int:
    """Closed form of :func:`z_total_recurrence`.

    Before the first refill the total just decreases. From ``j`` on it follows
    ``Z_j + k floor(s/m) - s`` (``s = t - j``) until it first hits zero at ``s = t*``,
    stays at zero until the next refill ``t~``, then repeats a fixed saw-tooth.
    """
    if not 0 <= j < m:
        raise ValueError("need 0 <= j < m")
    if t <= 0:
        return Z0
    if j > 0:
        if t <= j:
            return max(Z0 - t, 0) + (k if t == j else 0)
        Zj = max(Z0 - j, 0) + k
    else:
        Zj = Z0
    s = t - j
    if k >= m:
        t_star = Zj if Zj < m else math.inf
    else:
        periods = max(0, -(-(Zj + 1 - m) // (m - k)))
        t_star = Zj + k * periods
    if s <= t_star:
        return Zj + k * (s // m) - s
    t_tilde = m * (t_star // m + 1)
    if s < t_tilde:
        return 0
    r = s - t_tilde
    if k < m:
        return max(k - r % m, 0)
    return k * (1 + r // m) - r
