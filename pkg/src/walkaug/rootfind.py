"""Bracketing scalar root finder: Brent's method with a bisection safeguard."""

from __future__ import annotations


def brent(f, a: float, b: float, fa=None, fb=None,
          xtol: float = 1e-12, ftol: float = 1e-9, max_iter: int = 200) -> float:
    """Root of f on [a, b], where f(a) and f(b) have opposite signs.

    Inverse-quadratic / secant steps with bisection whenever interpolation
    would leave the bracket or converge too slowly. Stops once |f| <= ftol
    or the bracket width falls below xtol; if the iteration budget runs out
    the best abscissa found so far is returned.
    """
    fa = f(a) if fa is None else fa
    fb = f(b) if fb is None else fb
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if (fa > 0) == (fb > 0):
        raise ValueError("root is not bracketed: f(a) and f(b) have the same sign")

    c, fc = a, fa
    d = e = b - a
    for _ in range(max_iter):
        if (fb > 0) == (fc > 0):
            c, fc = a, fa
            d = e = b - a
        if abs(fc) < abs(fb):
            a, b, c = b, c, b
            fa, fb, fc = fb, fc, fb
        m = 0.5 * (c - b)
        if abs(fb) <= ftol or abs(m) <= xtol:
            return b
        if abs(e) < xtol or abs(fa) <= abs(fb):
            d = e = m  # bisection
        else:
            s = fb / fa
            if a == c:
                # secant
                p = 2.0 * m * s
                q = 1.0 - s
            else:
                # inverse quadratic interpolation
                q = fa / fc
                r = fb / fc
                p = s * (2.0 * m * q * (q - r) - (b - a) * (r - 1.0))
                q = (q - 1.0) * (r - 1.0) * (s - 1.0)
            if p > 0:
                q = -q
            else:
                p = -p
            if 2.0 * p < min(3.0 * m * q - abs(xtol * q), abs(e * q)):
                e, d = d, p / q
            else:
                d = e = m  # interpolation rejected, bisect
        a, fa = b, fb
        b += d if abs(d) > xtol else (xtol if m > 0 else -xtol)
        fb = f(b)
    return b
