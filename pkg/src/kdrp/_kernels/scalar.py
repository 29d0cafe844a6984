"""Scalar numerics shared verbatim by both kernel backends.

Every function here is written so it can run as plain Python and also be
compiled with numba's njit unchanged; the two backends therefore execute the
same operation sequence and produce bit-identical results.
"""

import math

# log(sqrt(2*pi)), rounded to the nearest float64
_LOG_SQRT_2PI = 0.9189385332046727


def normal_cdf(z):
    """Standard normal CDF via the convergent Taylor series

        Phi(z) = 1/2 + pdf(z) * (z + z^3/3 + z^5/(3*5) + z^7/(3*5*7) + ...)

    (Marsaglia's expansion).  Terms are accumulated until they no longer
    change the float64 sum, giving near machine precision for |z| <= 8; the
    tails beyond that are below 1e-15 and are returned as exact 0 or 1.
    """
    if z < -8.0:
        return 0.0
    if z > 8.0:
        return 1.0
    s = z
    b = z
    q = z * z
    i = 1.0
    while True:
        i += 2.0
        b *= q / i
        t = s + b
        if t == s:
            break
        s = t
    v = 0.5 + s * math.exp(-0.5 * q - _LOG_SQRT_2PI)
    if v < 0.0:
        return 0.0
    if v > 1.0:
        return 1.0
    return v


def clamp_span(lo, hi, dim, min_side):
    """Grow the inclusive span [lo, hi] to at least min_side pixels.

    Growth is toward the nearer image edge (ties toward the low edge); if the
    edge is reached before the deficit is covered, the remainder extends the
    other way.  Returns (lo, size); size == max(hi - lo + 1, min_side).
    """
    size = hi - lo + 1
    if size >= min_side:
        return lo, size
    deficit = min_side - size
    dist_lo = lo
    dist_hi = dim - 1 - hi
    if dist_lo <= dist_hi:
        lo = lo - deficit
        if lo < 0:
            lo = 0
    else:
        hi = hi + deficit
        if hi > dim - 1:
            hi = dim - 1
        lo = hi - min_side + 1
    return lo, min_side
