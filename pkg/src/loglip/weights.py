"""Singular-weight calculus for the backward-parabolic energy machinery.

The conditional-stability estimate weights every time slice by
``exp(2*gamma*t - 2*beta*Phi((t+tau)/beta))`` where ``Phi`` is built by
inverting the Osgood integral of the log-Lipschitz modulus of
continuity ``mu(s) = s*(1 + |log s|)``:

    osgood(p)        = int_{1/p}^1 ds/mu(s) = log(1 + log p)
    weight_slope     = osgood_inv(-lam*log y) = exp(y**(-lam) - 1)
    weight_exponent  = Phi(y) = -int_y^1 weight_slope dz   (<= 0)
    scaled_exponent  = y * Phi(1/y)  on [1, inf) -> (-inf, 0]

``weight_slope`` is the derivative of ``weight_exponent``; the exponent
itself has no closed form and is evaluated by adaptive quadrature (a
compiled kernel when available, a pure-Python twin otherwise).

Everything downstream overflows double precision long before the math
gets hard — already for moderate steepness ``lam``, ``Phi(1/5)`` is far
beyond 1e308 — so each quantity here also has a log-scale variant, and
linear values are materialised only when they provably fit.
"""

import math
from dataclasses import dataclass

from .errors import DomainError, RangeError

try:  # compiled fast path, optional
    from . import _weightcore as _core

    COMPILED_KERNELS = True
except ImportError:  # pure-Python twin, identical contract
    from . import _weightcore_py as _core

    COMPILED_KERNELS = False

#: log of the largest double; linear-scale values above this must stay in log form
_LOG_DBL_MAX = 709.0


def kernel_backend():
    """Which scalar-kernel build is active: 'compiled' or 'python'."""
    return "compiled" if COMPILED_KERNELS else "python"


# ---------------------------------------------------------------------------
# modulus of continuity and its Osgood integral


def modulus(s):
    """Log-Lipschitz modulus of continuity ``s*(1 + |log s|)``, s > 0."""
    if not s > 0.0:
        raise DomainError(f"modulus needs s > 0, got {s!r}")
    return s * (1.0 + abs(math.log(s)))


def osgood(p):
    """Osgood integral of the modulus: int_{1/p}^1 ds/mu(s) = log(1 + log p)."""
    if not p >= 1.0:
        raise DomainError(f"osgood needs p >= 1, got {p!r}")
    return math.log(1.0 + math.log(p))


def osgood_inv(w):
    """Inverse of :func:`osgood`: exp(exp(w) - 1) for w >= 0."""
    if not w >= 0.0:
        raise DomainError(f"osgood_inv needs w >= 0, got {w!r}")
    return math.exp(math.expm1(w))


# ---------------------------------------------------------------------------
# weight profile: slope, exponent, curvature


def _check_profile_args(lam, y):
    if not lam > 1.0:
        raise DomainError(f"weight steepness must exceed 1, got {lam!r}")
    if not 0.0 < y <= 1.0:
        raise DomainError(f"profile argument must lie in (0, 1], got {y!r}")


def log_weight_slope(lam, y):
    """log of the weight slope: y**(-lam) - 1."""
    _check_profile_args(lam, y)
    try:
        return math.pow(y, -lam) - 1.0
    except OverflowError as exc:
        raise RangeError(
            f"y**(-lam) overflows double range at lam={lam!r}, y={y!r}"
        ) from exc


def weight_slope(lam, y):
    """Weight slope exp(y**(-lam) - 1); equals d/dy of :func:`weight_exponent`.

    Raises RangeError once the value passes double range — use
    :func:`log_weight_slope` there.
    """
    lw = log_weight_slope(lam, y)
    if lw > _LOG_DBL_MAX:
        raise RangeError(
            f"weight slope exceeds double range (log value {lw:.6g}); "
            "use log_weight_slope"
        )
    return math.exp(lw)


def log_abs_weight_exponent(lam, y, tol=1e-10):
    """log|Phi(y)| with Phi(y) = -int_y^1 exp(z**(-lam)-1) dz; -inf at y=1."""
    _check_profile_args(lam, y)
    return _core.log_abs_exponent(lam, y, tol)


def weight_exponent(lam, y, tol=1e-10):
    """Phi(y) = -int_y^1 exp(z**(-lam)-1) dz, by adaptive quadrature.

    Nonpositive, strictly increasing and concave on (0, 1] with
    Phi(1) = 0.  Raises RangeError when |Phi| passes double range — use
    :func:`log_abs_weight_exponent` there.
    """
    la = log_abs_weight_exponent(lam, y, tol)
    if la > _LOG_DBL_MAX:
        raise RangeError(
            f"|weight exponent| exceeds double range (log value {la:.6g}); "
            "use log_abs_weight_exponent"
        )
    return -math.exp(la)


def weight_exponent_curvature(lam, y, step=None):
    """Second derivative of the weight exponent by centered differences.

    The slope varies on the boundary-layer scale ``y**(lam+1)/lam``, so
    the default step is cbrt(eps) times that scale (clamped into the
    domain).  Raises DomainError when no representable step can resolve
    the difference, which happens once the layer scale drops below the
    double-precision spacing at y.
    """
    _check_profile_args(lam, y)
    if step is None:
        scale = min(math.pow(y, lam + 1.0) / lam, 0.5 * y)
        if y < 1.0:
            scale = min(scale, 0.5 * (1.0 - y))
        step = 6.06e-6 * scale  # cbrt of double eps, times the local scale
    if step < 8.0 * 2.3e-16 * y:
        raise DomainError(
            f"curvature step {step:.3g} underflows the grid spacing at y={y!r}; "
            "not resolvable in double precision"
        )
    return (weight_slope(lam, y + step) - weight_slope(lam, y - step)) / (2.0 * step)


# ---------------------------------------------------------------------------
# scaled exponent y*Phi(1/y) and its inverse


def scaled_exponent(lam, y, tol=1e-10):
    """y * Phi(1/y): a decreasing bijection of [1, inf) onto (-inf, 0]."""
    if not lam > 1.0:
        raise DomainError(f"weight steepness must exceed 1, got {lam!r}")
    if not y >= 1.0:
        raise DomainError(f"scaled_exponent needs y >= 1, got {y!r}")
    if y == 1.0:
        return 0.0
    la = _core.log_abs_exponent(lam, 1.0 / y, tol) + math.log(y)
    if la > _LOG_DBL_MAX:
        raise RangeError(
            f"|scaled exponent| exceeds double range (log value {la:.6g})"
        )
    return -math.exp(la)


def scaled_exponent_inverse(lam, z, tol=1e-10, y_cap=1e300):
    """Inverse of :func:`scaled_exponent`: the y >= 1 with y*Phi(1/y) = z.

    Bracketed root search (geometric bracket growth, then bisection on
    the log residual); the returned value round-trips through
    :func:`scaled_exponent` within ``tol`` on the z side.
    """
    if not lam > 1.0:
        raise DomainError(f"weight steepness must exceed 1, got {lam!r}")
    if not z <= 0.0:
        raise DomainError(f"scaled_exponent_inverse needs z <= 0, got {z!r}")
    return _core.scaled_exponent_inverse(lam, z, z_tol=tol, rel_tol=1e-12, y_cap=y_cap)


# ---------------------------------------------------------------------------
# energy-estimate weight parameters


@dataclass(frozen=True)
class WeightParams:
    """Parameter bundle for the weighted energy estimate.

    ``lam`` sets the steepness of the weight profile, ``beta`` its time
    rescaling, ``gamma`` the plain exponential rate.  ``sigma`` is the
    verification horizon, ``tau = sigma/4`` the profile offset, and
    ``alpha = 1/sigma`` the Sobolev-index drift rate: time t is measured
    in the norm H^(1 - alpha*t).
    """

    lam: float
    beta: float
    gamma: float
    tau: float
    sigma: float
    alpha: float
    T: float

    def __post_init__(self):
        if not self.lam > 1.0:
            raise DomainError(f"weight steepness must exceed 1, got {self.lam!r}")
        for name in ("beta", "gamma", "tau", "sigma", "alpha", "T"):
            if not getattr(self, name) > 0.0:
                raise DomainError(f"{name} must be positive, got {getattr(self, name)!r}")
        if self.beta < (self.sigma + self.tau) * (1.0 - 1e-12):
            raise DomainError(
                f"beta must be at least sigma + tau = {self.sigma + self.tau!r}, "
                f"got {self.beta!r}"
            )
        if abs(self.alpha * self.sigma - 1.0) > 1e-9:
            raise DomainError(
                f"alpha must equal 1/sigma (alpha*sigma = {self.alpha * self.sigma!r})"
            )

    @classmethod
    def from_final_time(cls, T, lam, gamma, beta=None, alpha1=None):
        """Standard construction: alpha = max(alpha1, 1/T), sigma = 1/alpha, tau = sigma/4.

        ``alpha1`` is the problem-dependent drift floor; omitting it (or
        keeping it below 1/T, which is not restrictive) gives
        alpha = 1/T, i.e. the full interval [0, T] is covered.
        """
        if not T > 0.0:
            raise DomainError(f"final time must be positive, got {T!r}")
        alpha = 1.0 / T if alpha1 is None else max(alpha1, 1.0 / T)
        sigma = 1.0 / alpha
        tau = sigma / 4.0
        if beta is None:
            beta = sigma + tau
        return cls(lam=lam, beta=beta, gamma=gamma, tau=tau, sigma=sigma,
                   alpha=alpha, T=T)


def log_weight_factor(p, t, tol=1e-10):
    """Logarithm of the energy weight: 2*gamma*t - 2*beta*Phi((t+tau)/beta).

    Valid for t in [0, sigma]; the exponent part is nonnegative and
    decreasing in t.  Raises RangeError when even the log-scale value
    passes double range (steep regimes); :func:`log_weight_split` keeps
    working there.
    """
    base, wlog = log_weight_split(p, t, tol)
    if wlog == -math.inf:
        return base
    if wlog > _LOG_DBL_MAX:
        raise RangeError(
            f"log-weight itself exceeds double range (log-log value {wlog:.6g}); "
            "use log_weight_split"
        )
    return base + math.exp(wlog)


def log_weight_split(p, t, tol=1e-10):
    """Two-level form of the log weight: returns (base, wlog) with

        log weight = base + exp(wlog),
        base = 2*gamma*t,   wlog = log(2*beta) + log|Phi((t+tau)/beta)|.

    ``wlog`` is -inf when the exponent part vanishes (argument 1).  This
    representation stays inside double range in regimes where the log
    weight itself does not, and is what the energy harness consumes.
    """
    if not -1e-12 <= t <= p.sigma * (1.0 + 1e-12):
        raise DomainError(f"t={t!r} outside the verification window [0, {p.sigma!r}]")
    arg = (t + p.tau) / p.beta
    if not 0.0 < arg <= 1.0 + 1e-12:
        raise DomainError(
            f"weight argument (t+tau)/beta = {arg!r} outside (0, 1]"
        )
    arg = min(arg, 1.0)
    base = 2.0 * p.gamma * t
    la = log_abs_weight_exponent(p.lam, arg, tol)
    if la == -math.inf:
        return base, -math.inf
    return base, math.log(2.0 * p.beta) + la


# ---------------------------------------------------------------------------
# admissibility thresholds from the stability proof


@dataclass(frozen=True)
class StabilityThresholds:
    """Closed-form admissibility constants for the energy estimate.

    coercivity_rate:   min(4*log 2, kappa*log 2/4) — the usable lower
                       ellipticity rate after paradifferential losses.
    weight_order_floor: minimal admissible weight steepness,
                       16*alpha*(log 2)**2*(sigma+tau) / (coercivity_rate*(1+log 2)).
    low_band_top:      log2(16*alpha*log 2/kappa) — dyadic bands at or
                       below this index are handled as a low-frequency lump.
    """

    coercivity_rate: float
    weight_order_floor: float
    low_band_top: float


def stability_thresholds(kappa, alpha, sigma, tau):
    """Evaluate the three admissibility constants; see StabilityThresholds."""
    if not 0.0 < kappa <= 1.0:
        raise DomainError(f"kappa must lie in (0, 1], got {kappa!r}")
    for name, val in (("alpha", alpha), ("sigma", sigma), ("tau", tau)):
        if not val > 0.0:
            raise DomainError(f"{name} must be positive, got {val!r}")
    log2 = math.log(2.0)
    rate = min(4.0 * log2, kappa * log2 / 4.0)
    floor = 16.0 * alpha * log2 * log2 * (sigma + tau) / (rate * (1.0 + log2))
    band = math.log(16.0 * alpha * log2 / kappa) / log2
    return StabilityThresholds(
        coercivity_rate=rate, weight_order_floor=floor, low_band_top=band
    )
