"""Safeguarded Newton iteration inside a sign-change bracket."""
from __future__ import annotations

import math


class BracketError(ValueError):
    pass


def bracketed_newton(f, fprime, lo, hi, sign_lo=None, sign_hi=None, *,
                     xtol=1e-13, max_bisect=200, max_newton=50):
    """Root of ``f`` in ``(lo, hi)``.

    Newton steps are taken while they stay inside the current bracket and
    shrink the residual; otherwise the bracket is bisected.  Endpoint signs may
    be supplied when ``f`` is singular there (poles), in which case ``f`` is
    never evaluated at the endpoints.
    """
    if sign_lo is None:
        sign_lo = math.copysign(1.0, f(lo))
    if sign_hi is None:
        sign_hi = math.copysign(1.0, f(hi))
    if sign_lo == sign_hi:
        raise BracketError(f"no sign change on [{lo}, {hi}]")

    x = 0.5 * (lo + hi)
    fx = f(x)
    n_bisect = n_newton = 0
    while hi - lo > xtol and n_bisect < max_bisect:
        if fx == 0:
            return x
        if math.copysign(1.0, fx) == sign_lo:
            lo = x
        else:
            hi = x
        x_new = None
        if n_newton < max_newton:
            d = fprime(x)
            if d != 0 and math.isfinite(d):
                cand = x - fx / d
                if lo < cand < hi:
                    x_new = cand
                    n_newton += 1
        if x_new is not None:
            f_new = f(x_new)
            if abs(f_new) < 0.5 * abs(fx):
                if x_new == x:
                    return x
                x, fx = x_new, f_new
                continue
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        x, fx = mid, f(mid)
        n_bisect += 1
    return x
