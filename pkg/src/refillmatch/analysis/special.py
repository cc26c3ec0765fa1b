"""Lambert W, adaptive Simpson quadrature and bisection."""

from __future__ import annotations

import math

INV_E = math.exp(-1.0)


class DomainError(ValueError):
    pass


class BracketError(ValueError):
    def __init__(self, lo, hi, flo, fhi):
        self.values = (lo, hi, flo, fhi)
        super().__init__(f"no sign change: f({lo!r}) = {flo!r}, f({hi!r}) = {fhi!r}")


# branch-point series of W(-1/e + p^2 / (2e)) in p
_BRANCH = (-1.0, 1.0, -1.0 / 3.0, 11.0 / 72.0, -43.0 / 540.0, 769.0 / 17280.0, -221.0 / 8505.0)


def lambert_w(x: float) -> float:
    """Principal branch W0(x) for ``x >= -1/e`` (Halley iteration)."""
    x = float(x)
    if math.isnan(x):
        return x
    if x < -INV_E:
        if x > -INV_E - 1e-15:
            return -1.0
        raise DomainError(f"W(x) undefined for x = {x} < -1/e")
    if x == 0.0:
        return 0.0
    if math.isinf(x):
        return x
    q = 2.0 * (math.e * x + 1.0)
    if q < 1e-4:
        p = math.sqrt(max(q, 0.0))
        return sum(c * p**i for i, c in enumerate(_BRANCH))
    if x < -0.25:
        p = math.sqrt(q)
        w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p**3
    elif x < 3.0:
        w = math.log1p(x)
        w *= 1.0 - math.log1p(w) / (2.0 + w)
    else:
        l1 = math.log(x)
        l2 = math.log(l1)
        w = l1 - l2 + l2 / l1
    for _ in range(50):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        w -= step
        if abs(step) <= 1e-15 * (1.0 + abs(w)):
            break
    return w


def lambert_w_exp(y: float) -> float:
    """``W(exp(y))`` without forming ``exp(y)``; solves ``w + log(w) = y`` for large y."""
    if y < 700.0:
        return lambert_w(math.exp(y))
    w = y - math.log(y)
    for _ in range(50):
        step = (w + math.log(w) - y) * w / (w + 1.0)
        w -= step
        if abs(step) <= 1e-15 * w:
            break
    return w


def adaptive_simpson(f, a: float, b: float, tol: float = 1e-12, max_depth: int = 60) -> float:
    """Integral of ``f`` over [a, b] to absolute tolerance ``tol``."""
    if a == b:
        return 0.0
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    # explicit stack instead of recursion
    total = 0.0
    stack = [(a, b, fa, fm, fb, whole, tol, max_depth)]
    while stack:
        lo, hi, flo, fmid, fhi, est, eps, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = f(lm), f(rm)
        left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid)
        right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi)
        delta = left + right - est
        if depth <= 0 or abs(delta) <= 15.0 * eps:
            total += left + right + delta / 15.0
        else:
            stack.append((mid, hi, fmid, frm, fhi, right, 0.5 * eps, depth - 1))
            stack.append((lo, mid, flo, flm, fmid, left, 0.5 * eps, depth - 1))
    return total


def bisect(f, lo: float, hi: float, xtol: float = 1e-15, ftol: float = 0.0, maxiter: int = 200):
    """Root of ``f`` on [lo, hi]; stops when the bracket is below ``xtol`` or ``|f| <= ftol``."""
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise BracketError(lo, hi, flo, fhi)
    for _ in range(maxiter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0 or abs(fm) <= ftol:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo <= xtol * max(1.0, abs(mid)):
            break
    return 0.5 * (lo + hi)
