"""Scalar kernels of the singular-weight calculus (pure-Python build).

These are the hot inner loops of the package: adaptive quadrature of the
double-exponential profile ``exp(y**(-lam) - 1)`` and the bracketed root
search built on top of it.  A compiled twin lives in ``_weightcore.pyx``;
both expose the same functions and must stay behaviourally identical
(the test suite cross-checks them whenever the compiled build is
importable).

Quadrature strategy
-------------------
The integral ``int_y^1 exp(z**(-lam) - 1) dz`` develops a boundary layer
of width ``y**(lam+1)/lam`` at the left endpoint and its integrand
overflows double precision once ``y**(-lam) > ~710``, which happens in
every regime the energy harness actually needs (weight steepness of
order tens).  Substituting ``s = y**(-lam) - z**(-lam)`` fixes both
problems at once::

    int_y^1 exp(z**(-lam) - 1) dz
        = exp(Y - 1) / lam * int_0^(Y-1) exp(-s) * (Y - s)**(-1 - 1/lam) ds

with ``Y = y**(-lam)``.  The transformed integrand is smooth, bounded by
``1`` on the domain, and lives on an O(1) scale, so plain adaptive
Simpson bisection resolves it quickly; the giant prefactor is carried in
log scale.  The ``exp(-s)`` factor makes everything beyond ``s = 120``
irrelevant at double precision, so the range is capped there.
"""

import math

from .errors import BracketError, QuadratureError, RangeError

_TAIL_CAP = 120.0
_MAX_DEPTH = 60
_ABS_FLOOR = 1e-300


def _simpson_rec(Y, q, a, b, fa, fm, fb, whole, tol, depth, worst):
    m = 0.5 * (a + b)
    lm = 0.5 * (a + m)
    rm = 0.5 * (m + b)
    flm = math.exp(-lm) * (Y - lm) ** q
    frm = math.exp(-rm) * (Y - rm) ** q
    left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    delta = left + right - whole
    if abs(delta) <= 15.0 * tol or (b - a) < 1e-14 * _TAIL_CAP:
        return left + right + delta / 15.0
    if depth <= 0:
        worst[0] += abs(delta) / 15.0
        return left + right + delta / 15.0
    half = 0.5 * tol
    return _simpson_rec(
        Y, q, a, m, fa, flm, fm, left, half, depth - 1, worst
    ) + _simpson_rec(Y, q, m, b, fm, frm, fb, right, half, depth - 1, worst)


def _layer_integral(Y, lam, rel_tol):
    """Adaptive Simpson for int_0^S exp(-s)*(Y-s)**(-1-1/lam) ds."""
    q = -1.0 - 1.0 / lam
    S = min(Y - 1.0, _TAIL_CAP)
    a, b = 0.0, S
    fa = Y**q
    fb = math.exp(-b) * (Y - b) ** q
    m = 0.5 * (a + b)
    fm = math.exp(-m) * (Y - m) ** q
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    tol = max(rel_tol * abs(whole), _ABS_FLOOR)
    worst = [0.0]
    val = _simpson_rec(Y, q, a, b, fa, fm, fb, whole, tol, _MAX_DEPTH, worst)
    return val, worst[0]


def log_abs_exponent(lam, y, rel_tol=1e-10):
    """log of |int_y^1 exp(z**(-lam) - 1) dz| for 0 < y <= 1, lam > 1.

    Returns ``-inf`` at ``y = 1`` (empty integral).  Raises RangeError
    when ``y**(-lam)`` itself exceeds double range and QuadratureError
    if the layer integral cannot reach its tolerance.
    """
    if y == 1.0:
        return -math.inf
    e = -lam * math.log(y)
    if e > 709.0:
        raise RangeError(
            f"y**(-lam) overflows double range (exponent {e:.6g}); "
            "the weight exponent is not representable here"
        )
    Y = math.exp(e)
    val, bad = _layer_integral(Y, lam, rel_tol)
    if not val > 0.0 or bad > 4.0 * max(rel_tol * val, _ABS_FLOOR):
        raise QuadratureError(
            f"weight-exponent quadrature stalled at lam={lam!r}, y={y!r}",
            achieved=bad,
        )
    return (Y - 1.0) + math.log(val) - math.log(lam)


def log_abs_exponent_grid(lam, ys, rel_tol=1e-10):
    """log_abs_exponent evaluated over an iterable of y values."""
    return [log_abs_exponent(lam, y, rel_tol) for y in ys]


def scaled_exponent_inverse(lam, z, z_tol=1e-10, rel_tol=1e-12, y_cap=1e300):
    """Solve y * Phi(1/y) = z for y >= 1, where Phi(w) = -int_w^1 exp(z**(-lam)-1) dz.

    The map is a decreasing bijection of [1, inf) onto (-inf, 0]; the
    residual is driven to zero in log scale (robust at any magnitude of
    z) by bisection after geometric bracket growth.
    """
    if z == 0.0:
        return 1.0
    target = math.log(-z)

    def logres(yv):
        return math.log(yv) + log_abs_exponent(lam, 1.0 / yv, rel_tol) - target

    lo, hi = 1.0, 2.0
    while logres(hi) < 0.0:
        lo = hi
        hi *= 2.0
        if hi > y_cap:
            raise BracketError(
                f"bracket expansion passed the cap {y_cap:.3g}; "
                f"z={z!r} too negative for floating-point range"
            )
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        r = logres(mid)
        if abs(math.expm1(r)) * abs(z) <= 0.5 * z_tol:
            return mid
        if r < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    return 0.5 * (lo + hi)
