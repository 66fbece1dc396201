"""Coefficient families, their regularity diagnostics, and time-mollification.

A family is a symmetric matrix of diffusion coefficients ``a_jk(t)``
(optionally plus a time-constant spatial part) together with a declared
regularity class and ellipticity constant.  Diagnostics measure what is
actually true of the data: extremal Rayleigh quotients, the
log-Lipschitz seminorm

    sup |a(t) - a(s)| / (|t-s| * (1 + |log|t-s||)),   0 < |t-s| <= 1,

and the plain Lipschitz quotient it replaces.  The built-in borderline
family uses ``1 + c*t*(1 - log t)``, which is log-Lipschitz with
seminorm exactly ``c`` but not Lipschitz.

Mollification convolves each entry in time with a fixed smooth bump
supported in [-1/2, 1/2], after constant continuation outside the time
window; the smoothed family keeps the lower ellipticity bound and obeys
the classical closeness/derivative bounds with the measured seminorm.
"""

import csv
import math
from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .errors import DomainError
from .grids import Field, gradient_sup_norm

_CLASSES = ("constant", "lipschitz", "log-lipschitz")


def borderline_profile(t):
    """t*(1 - log t) for t > 0, continuously extended by 0 at t = 0.

    The canonical log-Lipschitz-but-not-Lipschitz modulus shape on
    [0, 1]: its increments match t*(1 + |log t|) with constant one.
    """
    t = np.asarray(t, dtype=np.float64)
    out = np.zeros_like(t)
    pos = t > 0.0
    out[pos] = t[pos] * (1.0 - np.log(t[pos]))
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# entries


@dataclass(frozen=True)
class ConstantEntry:
    level: float

    x_dependent = False

    def value(self, t):
        return self.level

    def values(self, ts):
        return np.full(np.shape(ts), self.level)


@dataclass(frozen=True)
class LinearEntry:
    intercept: float
    slope: float

    x_dependent = False

    def value(self, t):
        return self.intercept + self.slope * t

    def values(self, ts):
        return self.intercept + self.slope * np.asarray(ts, dtype=np.float64)


@dataclass(frozen=True)
class BorderlineEntry:
    """base + amplitude * t * (1 - log t): log-Lipschitz exactly."""

    base: float = 1.0
    amplitude: float = 0.5

    x_dependent = False

    def value(self, t):
        return float(self.base + self.amplitude * borderline_profile(t))

    def values(self, ts):
        return self.base + self.amplitude * borderline_profile(np.asarray(ts))


@dataclass(frozen=True)
class SampledEntry:
    """Piecewise-linear interpolant of (t, value) samples; constant
    continuation outside the sampled range."""

    times: tuple
    levels: tuple

    x_dependent = False

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64)
        if t.size < 2 or np.any(np.diff(t) <= 0):
            raise DomainError("sampled entry needs >= 2 strictly increasing times")
        if len(self.times) != len(self.levels):
            raise DomainError("sampled entry times/levels length mismatch")

    def value(self, t):
        return float(np.interp(t, self.times, self.levels))

    def values(self, ts):
        return np.interp(np.asarray(ts, dtype=np.float64), self.times, self.levels)

    @classmethod
    def from_csv(cls, path):
        times, levels = [], []
        with open(path, newline="") as handle:
            for row in csv.reader(handle):
                if not row:
                    continue
                try:
                    t, v = float(row[0]), float(row[1])
                except ValueError:
                    continue  # header line
                times.append(t)
                levels.append(v)
        if not times:
            raise DomainError(f"{path}: no (t, value) samples found")
        return cls(times=tuple(times), levels=tuple(levels))


@dataclass(frozen=True)
class SpaceModulatedEntry:
    """Additive separable entry a(t, x) = time part + space part.

    The space part is a time-constant real field; diagnostics and the
    variable-coefficient stepper consume the grid profile.
    """

    time_entry: object
    space_field: Field

    x_dependent = True

    def __post_init__(self):
        if not self.space_field.is_real(tol=1e-10):
            raise DomainError("space modulation must be a real field")

    def value(self, t):
        raise DomainError("entry is x-dependent; use profile(t)")

    def values(self, ts):
        raise DomainError("entry is x-dependent; use profile(t)")

    def profile(self, t):
        return self.time_entry.value(t) + self.space_field.physical.real

    def extremes(self, t):
        p = self.profile(t)
        return float(np.min(p)), float(np.max(p))


def entry_profile(entry, t, grid):
    """a_jk(t, .) on the grid, for any entry kind."""
    if entry.x_dependent:
        return entry.profile(t)
    return np.full(grid.shape, entry.value(t))


def entry_extremes(entry, t):
    if entry.x_dependent:
        return entry.extremes(t)
    v = entry.value(t)
    return v, v


# ---------------------------------------------------------------------------
# family


@dataclass(frozen=True)
class CoefficientFamily:
    """Symmetric matrix of coefficient entries plus declared metadata."""

    dim: int
    entries: tuple  # tuple of tuples, entries[j][k]
    kappa: float
    declared_class: str = "log-lipschitz"
    label: str = ""

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise DomainError(f"dim must be 1 or 2, got {self.dim!r}")
        if not 0.0 < self.kappa <= 1.0:
            raise DomainError(f"kappa must lie in (0, 1], got {self.kappa!r}")
        if self.declared_class not in _CLASSES:
            raise DomainError(
                f"declared_class must be one of {_CLASSES}, got {self.declared_class!r}"
            )
        if len(self.entries) != self.dim or any(
            len(row) != self.dim for row in self.entries
        ):
            raise DomainError("entries must form a dim x dim matrix")
        for j in range(self.dim):
            for k in range(j + 1, self.dim):
                a, b = self.entries[j][k], self.entries[k][j]
                if a is not b and a != b:
                    raise DomainError("entries must form a symmetric matrix")

    @classmethod
    def isotropic(cls, entry, dim=1, kappa=1.0, declared_class="log-lipschitz",
                  label=""):
        """Diagonal family with the same entry on the diagonal."""
        zero = ConstantEntry(0.0)
        rows = tuple(
            tuple(entry if j == k else zero for k in range(dim)) for j in range(dim)
        )
        return cls(dim=dim, entries=rows, kappa=kappa,
                   declared_class=declared_class, label=label)

    @property
    def x_dependent(self):
        return any(e.x_dependent for row in self.entries for e in row)

    def entry_list(self):
        """Unique entries of the (symmetric) matrix, with their indices."""
        out = []
        for j in range(self.dim):
            for k in range(j, self.dim):
                out.append((j, k, self.entries[j][k]))
        return out

    def symbol(self, t, xi):
        """sum_jk a_jk(t) xi_j xi_k for an x-independent family.

        ``xi`` is a sequence of ``dim`` components (scalars or arrays).
        """
        if self.x_dependent:
            raise DomainError("symbol undefined for x-dependent families")
        total = 0.0
        for j in range(self.dim):
            for k in range(self.dim):
                total = total + self.entries[j][k].value(t) * xi[j] * xi[k]
        return total

    def profile_matrix(self, t, grid):
        """Matrix of grid profiles a_jk(t, .) used by the stepper."""
        return [
            [entry_profile(self.entries[j][k], t, grid) for k in range(self.dim)]
            for j in range(self.dim)
        ]


def heat_family(dim=1):
    """Unit constant coefficients: exact heat evolution."""
    return CoefficientFamily.isotropic(
        ConstantEntry(1.0), dim=dim, kappa=1.0, declared_class="constant",
        label="heat",
    )


def borderline_family(amplitude=0.5, dim=1):
    """1 + amplitude * t(1 - log t): log-Lipschitz, seminorm = amplitude."""
    if not 0.0 < amplitude <= 1.0:
        raise DomainError(f"amplitude must lie in (0, 1], got {amplitude!r}")
    return CoefficientFamily.isotropic(
        BorderlineEntry(1.0, amplitude),
        dim=dim,
        kappa=1.0 / (1.0 + amplitude),
        declared_class="log-lipschitz",
        label=f"borderline[{amplitude:g}]",
    )


# ---------------------------------------------------------------------------
# diagnostics


def default_direction_samples(dim, count=16):
    if dim == 1:
        return [(1.0,)]
    angles = np.linspace(0.0, math.pi, count, endpoint=False)
    return [(math.cos(a), math.sin(a)) for a in angles]


def ellipticity_constants(fam, t_samples, xi_samples=None):
    """Extremal Rayleigh quotients sum a_jk xi_j xi_k / |xi|^2 over samples."""
    t_samples = list(t_samples)
    if not t_samples:
        raise DomainError("ellipticity check needs at least one time sample")
    xi_samples = xi_samples or default_direction_samples(fam.dim)
    lo, hi = math.inf, -math.inf
    for t in t_samples:
        for xi in xi_samples:
            norm2 = sum(c * c for c in xi)
            if norm2 == 0.0:
                continue
            if fam.x_dependent:
                q_lo, q_hi = _rayleigh_extremes_x(fam, t, xi, norm2)
            else:
                q = fam.symbol(t, xi) / norm2
                q_lo = q_hi = q
            lo = min(lo, q_lo)
            hi = max(hi, q_hi)
    return lo, hi


def _rayleigh_extremes_x(fam, t, xi, norm2):
    acc = None
    for j in range(fam.dim):
        for k in range(fam.dim):
            entry = fam.entries[j][k]
            if entry.x_dependent:
                term = entry.profile(t) * (xi[j] * xi[k])
            else:
                term = entry.value(t) * (xi[j] * xi[k])
            acc = term if acc is None else acc + term
    acc = np.asarray(acc) / norm2
    return float(np.min(acc)), float(np.max(acc))


def is_reconstruction_normalized(fam, t_samples, xi_samples=None):
    """Whether 1/2 <= quotient <= 2 over the samples (with the extremes)."""
    lo, hi = ellipticity_constants(fam, t_samples, xi_samples)
    return (lo >= 0.5 - 1e-12 and hi <= 2.0 + 1e-12), lo, hi


def default_pair_samples(t_max=1.0, base_points=9, dyadic_depth=40):
    """(t, s) pairs combining coarse separations with dyadic shrinkage."""
    bases = np.linspace(0.0, t_max, base_points)
    pairs = [(float(a), float(b)) for a in bases for b in bases if a < b]
    for j in range(1, dyadic_depth + 1):
        h = min(2.0**-j, t_max)
        pairs.append((0.0, h))
        pairs.append((t_max - h, t_max))
        pairs.append((t_max / 3.0, min(t_max / 3.0 + h, t_max)))
    return pairs


def _pair_quotient(entry, t, s, weight):
    if entry.x_dependent:
        diff = float(np.max(np.abs(entry.profile(t) - entry.profile(s))))
    else:
        diff = abs(entry.value(t) - entry.value(s))
    return diff / weight


def ll_seminorm(fam, pair_samples):
    """Empirical log-Lipschitz seminorm over the given (t, s) pairs."""
    pairs = [(t, s) for t, s in pair_samples if 0.0 < abs(t - s) <= 1.0]
    if not pairs:
        raise DomainError("no admissible pairs (need 0 < |t-s| <= 1)")
    best = 0.0
    for t, s in pairs:
        h = abs(t - s)
        weight = h * (1.0 + abs(math.log(h)))
        for _, _, entry in fam.entry_list():
            best = max(best, _pair_quotient(entry, t, s, weight))
    return best


def lipschitz_quotient_sup(fam, pair_samples):
    """Plain sup |a(t)-a(s)|/|t-s| — diverges for genuinely log-Lipschitz data."""
    pairs = [(t, s) for t, s in pair_samples if t != s]
    if not pairs:
        raise DomainError("no admissible pairs")
    best = 0.0
    for t, s in pairs:
        h = abs(t - s)
        for _, _, entry in fam.entry_list():
            best = max(best, _pair_quotient(entry, t, s, h))
    return best


def sup_diagnostics(fam, t_samples):
    """(sup |a_jk|, sup |grad_x a_jk|) over entries and samples.

    The second component is zero for x-independent families; both are
    reported separately rather than folded into one constant.
    """
    t_samples = list(t_samples)
    if not t_samples:
        raise DomainError("need at least one time sample")
    amp = 0.0
    grad = 0.0
    for _, _, entry in fam.entry_list():
        if entry.x_dependent:
            for t in t_samples:
                lo, hi = entry.extremes(t)
                amp = max(amp, abs(lo), abs(hi))
            grad = max(grad, gradient_sup_norm(entry.space_field))
        else:
            vals = entry.values(np.asarray(t_samples))
            amp = max(amp, float(np.max(np.abs(vals))))
    return amp, grad


# ---------------------------------------------------------------------------
# mollifier


def _leggauss_on_support(order):
    nodes, weights = np.polynomial.legendre.leggauss(order)
    return 0.5 * nodes, 0.5 * weights


@dataclass(frozen=True)
class Mollifier:
    """Normalized smooth bump exp(-1/(1-(2s)^2)) on (-1/2, 1/2).

    The normalization constant is fixed so the quadrature rule used for
    every convolution assigns the profile mass exactly 1; mollifying a
    constant is then exact rather than approximate.
    """

    order: int = 192
    _nodes: np.ndarray = dataclass_field(init=False, repr=False, compare=False,
                                         default=None)
    _weights: np.ndarray = dataclass_field(init=False, repr=False, compare=False,
                                           default=None)
    _normalization: float = dataclass_field(init=False, repr=False, compare=False,
                                            default=0.0)

    def __post_init__(self):
        nodes, weights = _leggauss_on_support(self.order)
        raw = self._raw(nodes)
        object.__setattr__(self, "_nodes", nodes)
        object.__setattr__(self, "_weights", weights)
        object.__setattr__(self, "_normalization", 1.0 / float(np.sum(weights * raw)))

    @staticmethod
    def _raw(s):
        s = np.asarray(s, dtype=np.float64)
        out = np.zeros_like(s)
        inside = np.abs(s) < 0.5
        u = s[inside]
        out[inside] = np.exp(-1.0 / (1.0 - 4.0 * u * u))
        return out

    def density(self, s):
        return self._normalization * self._raw(s)

    def derivative(self, s):
        s = np.asarray(s, dtype=np.float64)
        out = np.zeros_like(s)
        inside = np.abs(s) < 0.5
        u = s[inside]
        denom = 1.0 - 4.0 * u * u
        out[inside] = (
            self._normalization * np.exp(-1.0 / denom) * (-8.0 * u / denom**2)
        )
        return out

    @property
    def derivative_l1(self):
        """int |rho'| = 2 * rho(0) (even, unimodal profile)."""
        return 2.0 * self._normalization * math.exp(-1.0)

    def convolve(self, sample_fn, t, epsilon):
        """int rho(s) * f(t - epsilon*s) ds via the fixed rule.

        ``sample_fn`` maps an array of times to coefficient values.
        """
        pts = t - epsilon * self._nodes
        vals = sample_fn(pts)
        return float(np.sum(self._weights * self.density(self._nodes) * vals))

    def convolve_derivative(self, sample_fn, t, epsilon):
        """d/dt of the convolution: (1/eps) * int rho'(s) f(t - eps*s) ds."""
        pts = t - epsilon * self._nodes
        vals = sample_fn(pts)
        return float(
            np.sum(self._weights * self.derivative(self._nodes) * vals) / epsilon
        )


@dataclass(frozen=True)
class MollifiedEntry:
    """Time-mollified view of a base entry, constant-continued outside
    [span_lo, span_hi]."""

    base: object
    epsilon: float
    rho: Mollifier
    span_lo: float
    span_hi: float

    x_dependent = False

    def _clamped_values(self, ts):
        return self.base.values(np.clip(ts, self.span_lo, self.span_hi))

    def value(self, t):
        return self.rho.convolve(self._clamped_values, t, self.epsilon)

    def values(self, ts):
        return np.array([self.value(t) for t in np.asarray(ts, dtype=np.float64).ravel()])

    def derivative(self, t):
        return self.rho.convolve_derivative(self._clamped_values, t, self.epsilon)


def mollify(fam, epsilon, rho=None, t_span=(0.0, 1.0)):
    """Family with every entry smoothed in time at scale epsilon.

    Spatial parts (time-constant) pass through unchanged; the smoothing
    convolution is linear, so additive separability is preserved exactly.
    """
    if not 0.0 < epsilon <= 1.0:
        raise DomainError(f"epsilon must lie in (0, 1], got {epsilon!r}")
    rho = rho or Mollifier()
    lo, hi = t_span

    cache = {}

    def smooth(entry):
        if id(entry) not in cache:
            if entry.x_dependent:
                cache[id(entry)] = SpaceModulatedEntry(
                    time_entry=MollifiedEntry(entry.time_entry, epsilon, rho, lo, hi),
                    space_field=entry.space_field,
                )
            else:
                cache[id(entry)] = MollifiedEntry(entry, epsilon, rho, lo, hi)
        return cache[id(entry)]

    rows = tuple(tuple(smooth(e) for e in row) for row in fam.entries)
    return CoefficientFamily(
        dim=fam.dim, entries=rows, kappa=fam.kappa,
        declared_class=fam.declared_class,
        label=f"{fam.label}+smoothed[{epsilon:g}]" if fam.label else
              f"smoothed[{epsilon:g}]",
    )


def mollifier_bounds_check(fam, epsilon, rho=None, t_grid=None, t_span=(0.0, 1.0)):
    """Measured (sup|a_eps - a|, sup|d/dt a_eps|) over a time grid.

    Compare against ``seminorm * eps * (|log eps| + 1)`` and
    ``seminorm * rho.derivative_l1 * (|log eps| + 1)`` with the
    empirically measured log-Lipschitz seminorm.
    """
    rho = rho or Mollifier()
    smooth = mollify(fam, epsilon, rho, t_span)
    if t_grid is None:
        t_grid = np.linspace(t_span[0], t_span[1], 401)
    closeness = 0.0
    slope = 0.0
    for (j, k, entry), (_, _, smoothed) in zip(fam.entry_list(), smooth.entry_list()):
        if entry.x_dependent:
            entry = entry.time_entry
            smoothed = smoothed.time_entry
        base_vals = entry.values(t_grid)
        for t, base_val in zip(t_grid, base_vals):
            closeness = max(closeness, abs(smoothed.value(t) - base_val))
            slope = max(slope, abs(smoothed.derivative(t)))
    return closeness, slope
