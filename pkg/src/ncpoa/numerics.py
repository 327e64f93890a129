"""Scalar search primitives shared by the solvers.

Everything downstream reduces to two shapes: the root of a strictly
decreasing function on [0, inf), and the max of a concave (possibly
kinked) function on a closed interval.  Both are robust to +inf values,
which the demand maps produce at zero price.
"""

from __future__ import annotations

import math

#: Hard cap on any rate or load bracket; prices grow linearly so every
#: optimum and best response sits far below this.
SEARCH_CAP = 1e9

#: Absolute bisection width at which a root is considered located.
ROOT_XTOL = 1e-13

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def decreasing_root(f, lo: float = 0.0, hi: float | None = None,
                    xtol: float = ROOT_XTOL, max_iter: int = 200) -> float:
    """Root of a decreasing f on [lo, cap], clipped at lo.

    f(lo) <= 0 returns lo.  If no sign change is found below SEARCH_CAP
    the cap is returned (callers treat that as "effectively unbounded").
    f may return +inf on the left of the root.
    """
    flo = f(lo)
    if not flo > 0.0:
        return lo
    if hi is None:
        hi = max(1.0, 2.0 * lo)
        while f(hi) > 0.0:
            hi *= 2.0
            if hi >= SEARCH_CAP:
                return SEARCH_CAP
    elif f(hi) > 0.0:
        return hi
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= xtol:
            break
    return 0.5 * (lo + hi)


def golden_max(f, lo: float, hi: float, xtol: float = 1e-10,
               max_iter: int = 300) -> tuple:
    """Golden-section maximization of a unimodal f on [lo, hi].

    Returns (argmax, value).  Flat tops (piecewise-linear payoffs) are
    fine: any point of the plateau is returned.
    """
    if hi < lo:
        raise ValueError(f"empty interval [{lo}, {hi}]")
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= xtol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    fx = f(x)
    # the midpoint can lose to an interior probe on a kink; keep the best
    for cand, val in ((c, fc), (d, fd)):
        if val > fx:
            x, fx = cand, val
    return x, fx
