# cython: language_level=3
"""Compiled twin of ``loglip._weightcore_py``.

Same algorithms, same tolerances, same exception behaviour; see the
pure-Python module for the derivation of the substituted integral.  Kept
in lockstep by cross-check tests.
"""

from libc.math cimport exp, expm1, fabs, log, pow

from .errors import BracketError, QuadratureError, RangeError

cdef double _TAIL_CAP = 120.0
cdef int _MAX_DEPTH = 60
cdef double _ABS_FLOOR = 1e-300


cdef double _simpson_rec(double Y, double q, double a, double b,
                         double fa, double fm, double fb,
                         double whole, double tol, int depth,
                         double *worst) noexcept nogil:
    cdef double m = 0.5 * (a + b)
    cdef double lm = 0.5 * (a + m)
    cdef double rm = 0.5 * (m + b)
    cdef double flm = exp(-lm) * pow(Y - lm, q)
    cdef double frm = exp(-rm) * pow(Y - rm, q)
    cdef double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    cdef double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    cdef double delta = left + right - whole
    if fabs(delta) <= 15.0 * tol or (b - a) < 1e-14 * _TAIL_CAP:
        return left + right + delta / 15.0
    if depth <= 0:
        worst[0] += fabs(delta) / 15.0
        return left + right + delta / 15.0
    cdef double half = 0.5 * tol
    return (_simpson_rec(Y, q, a, m, fa, flm, fm, left, half, depth - 1, worst)
            + _simpson_rec(Y, q, m, b, fm, frm, fb, right, half, depth - 1, worst))


cdef (double, double) _layer_integral(double Y, double lam, double rel_tol) noexcept nogil:
    cdef double q = -1.0 - 1.0 / lam
    cdef double S = Y - 1.0
    if S > _TAIL_CAP:
        S = _TAIL_CAP
    cdef double a = 0.0
    cdef double b = S
    cdef double fa = pow(Y, q)
    cdef double fb = exp(-b) * pow(Y - b, q)
    cdef double m = 0.5 * (a + b)
    cdef double fm = exp(-m) * pow(Y - m, q)
    cdef double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    cdef double tol = rel_tol * fabs(whole)
    if tol < _ABS_FLOOR:
        tol = _ABS_FLOOR
    cdef double worst = 0.0
    cdef double val = _simpson_rec(Y, q, a, b, fa, fm, fb, whole, tol,
                                   _MAX_DEPTH, &worst)
    return val, worst


cdef double _log_abs_exponent_checked(double lam, double y, double rel_tol) except? -1e308:
    if y == 1.0:
        return -float("inf")
    cdef double e = -lam * log(y)
    if e > 709.0:
        raise RangeError(
            f"y**(-lam) overflows double range (exponent {e:.6g}); "
            "the weight exponent is not representable here"
        )
    cdef double Y = exp(e)
    cdef double val, bad
    val, bad = _layer_integral(Y, lam, rel_tol)
    cdef double floor = rel_tol * val
    if floor < _ABS_FLOOR:
        floor = _ABS_FLOOR
    if not val > 0.0 or bad > 4.0 * floor:
        raise QuadratureError(
            f"weight-exponent quadrature stalled at lam={lam!r}, y={y!r}",
            achieved=bad,
        )
    return (Y - 1.0) + log(val) - log(lam)


def log_abs_exponent(double lam, double y, double rel_tol=1e-10):
    """log of |int_y^1 exp(z**(-lam) - 1) dz| for 0 < y <= 1, lam > 1."""
    return _log_abs_exponent_checked(lam, y, rel_tol)


def log_abs_exponent_grid(double lam, ys, double rel_tol=1e-10):
    """log_abs_exponent evaluated over an iterable of y values."""
    cdef list out = []
    for y in ys:
        out.append(_log_abs_exponent_checked(lam, float(y), rel_tol))
    return out


def scaled_exponent_inverse(double lam, double z, double z_tol=1e-10,
                            double rel_tol=1e-12, double y_cap=1e300):
    """Solve y * Phi(1/y) = z for y >= 1 (bisection on the log residual)."""
    if z == 0.0:
        return 1.0
    cdef double target = log(-z)
    cdef double lo = 1.0
    cdef double hi = 2.0
    cdef double mid, r
    cdef int i
    while log(hi) + _log_abs_exponent_checked(lam, 1.0 / hi, rel_tol) - target < 0.0:
        lo = hi
        hi *= 2.0
        if hi > y_cap:
            raise BracketError(
                f"bracket expansion passed the cap {y_cap:.3g}; "
                f"z={z!r} too negative for floating-point range"
            )
    for i in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        r = log(mid) + _log_abs_exponent_checked(lam, 1.0 / mid, rel_tol) - target
        if fabs(expm1(r)) * fabs(z) <= 0.5 * z_tol:
            return mid
        if r < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    return 0.5 * (lo + hi)
