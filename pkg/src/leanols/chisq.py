"""Regularized incomplete gamma functions and chi-square quantiles.

Series expansion below ``x < a + 1`` and a modified-Lentz continued fraction
above it, in the usual way.
"""

from __future__ import annotations

import math

from .errors import DomainError

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 10_000


def _gser(a: float, x: float) -> float:
    # lower regularized P(a, x) by series
    if x == 0.0:
        return 0.0
    ap = a
    term = 1.0 / a
    total = term
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gcf(a: float, x: float) -> float:
    # upper regularized Q(a, x) by continued fraction
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def gammainc_lower(a: float, x: float) -> float:
    """Regularized lower incomplete gamma ``P(a, x)``."""
    if a <= 0:
        raise DomainError("a must be positive")
    if x < 0:
        raise DomainError("x must be non-negative")
    if x < a + 1.0:
        return _gser(a, x)
    return 1.0 - _gcf(a, x)


def gammainc_upper(a: float, x: float) -> float:
    """Regularized upper incomplete gamma ``Q(a, x) = 1 - P(a, x)``."""
    if a <= 0:
        raise DomainError("a must be positive")
    if x < 0:
        raise DomainError("x must be non-negative")
    if x < a + 1.0:
        return 1.0 - _gser(a, x)
    return _gcf(a, x)


def chisq_sf(x: float, df: int) -> float:
    if x <= 0:
        return 1.0
    return gammainc_upper(df / 2.0, x / 2.0)


def chisq_cdf(x: float, df: int) -> float:
    if x <= 0:
        return 0.0
    return gammainc_lower(df / 2.0, x / 2.0)


def _chisq_logpdf(x: float, df: int) -> float:
    k = df / 2.0
    return (k - 1.0) * math.log(x) - x / 2.0 - k * math.log(2.0) - math.lgamma(k)


def chisq_quantile(df: int, alpha: float, rtol: float = 1e-10) -> float:
    """Return the ``1 - alpha`` quantile of the chi-square law with ``df`` degrees of freedom.

    Bisection on the tail probability brackets the root, then Newton steps
    polish it to relative tolerance ``rtol``.
    """
    if int(df) != df or df < 1:
        raise DomainError(f"df must be a positive integer, got {df}")
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    df = int(df)

    # work with whichever tail is smaller to avoid cancellation
    upper_tail = alpha <= 0.5

    def f(x: float) -> float:
        if upper_tail:
            return chisq_sf(x, df) - alpha
        return chisq_cdf(x, df) - (1.0 - alpha)

    sign = -1.0 if upper_tail else 1.0  # sign of f'(x)

    lo, hi = 0.0, max(1.0, float(df))
    while sign * f(hi) < 0:
        lo, hi = hi, 2.0 * hi
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if sign * f(mid) < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-3 * hi:
            break

    x = 0.5 * (lo + hi)
    for _ in range(50):
        fx = f(x)
        dens = math.exp(_chisq_logpdf(x, df))
        if dens <= 0 or not math.isfinite(dens):
            break
        step = fx / (-dens if upper_tail else dens)
        nxt = x - step
        if not (lo <= nxt <= hi):
            nxt = 0.5 * (lo + hi)
        if sign * f(nxt) < 0:
            lo = nxt
        else:
            hi = nxt
        if abs(nxt - x) <= rtol * abs(nxt):
            return nxt
        x = nxt
    # Newton stalled: finish by bisection
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if sign * f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
