"""Periodic-torus grids, spectral fields, and norms.

The whole-space problem is discretized on a torus of period ``L``
(default 2*pi): every test field here is band-limited or rapidly
decaying, so the periodization error sits far below the tolerances in
play.  Frequencies are ``xi_k = 2*pi*k/L`` for ``k`` in
``[-points/2, points/2)`` and transforms are unitary, so the discrete
Parseval identity is exact up to rounding.

Norms carry the Riemann quadrature weight ``(L/points)**dim``, making
``l2_norm`` a consistent discretization of the continuum L2 norm and
``sobolev_norm`` the Fourier-multiplier norm
``(sum (1+|xi|^2)**theta |u_hat|^2)**(1/2)`` in the same scaling.
"""

import csv
import math
import os
import tempfile
from contextlib import contextmanager
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DomainError

_ALLOWED_DIMS = (1, 2)
_MIN_POINTS = 64


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid: ``points`` samples per axis on [0, period)."""

    dim: int = 1
    period: float = 2.0 * math.pi
    points: int = 2048

    def __post_init__(self):
        if self.dim not in _ALLOWED_DIMS:
            raise DomainError(f"dim must be 1 or 2, got {self.dim!r}")
        if not self.period > 0.0:
            raise DomainError(f"period must be positive, got {self.period!r}")
        n = self.points
        if n < _MIN_POINTS or n & (n - 1):
            raise DomainError(
                f"points must be a power of two >= {_MIN_POINTS}, got {n!r}"
            )

    @cached_property
    def axis_points(self):
        """Sample positions along one axis."""
        return np.arange(self.points) * (self.period / self.points)

    @cached_property
    def axis_frequencies(self):
        """Frequencies 2*pi*k/period in FFT layout along one axis."""
        return 2.0 * math.pi * np.fft.fftfreq(self.points, d=self.period / self.points)

    @cached_property
    def frequencies(self):
        """Tuple of per-axis frequency arrays broadcast to the grid shape."""
        xi = self.axis_frequencies
        if self.dim == 1:
            return (xi,)
        return (xi[:, None] * np.ones_like(xi)[None, :],
                np.ones_like(xi)[:, None] * xi[None, :])

    @cached_property
    def abs_frequencies(self):
        """|xi| on the grid."""
        if self.dim == 1:
            return np.abs(self.axis_frequencies)
        fx, fy = self.frequencies
        return np.hypot(fx, fy)

    @property
    def shape(self):
        return (self.points,) * self.dim

    @property
    def max_frequency(self):
        """Largest |xi| present on the grid (the Nyquist magnitude)."""
        return math.pi * self.points / self.period

    @property
    def cell_volume(self):
        return (self.period / self.points) ** self.dim

    def positions(self):
        """Physical coordinates: a single array in 1D, a meshgrid pair in 2D."""
        x = self.axis_points
        if self.dim == 1:
            return x
        return np.meshgrid(x, x, indexing="ij")


@dataclass(frozen=True, eq=False)
class Field:
    """Immutable complex field carrying both of its representations.

    ``physical`` and ``spectral`` are kept consistent by construction
    (unitary FFT between them) and frozen against writes.
    """

    grid: GridSpec
    physical: np.ndarray
    spectral: np.ndarray

    def __post_init__(self):
        self.physical.flags.writeable = False
        self.spectral.flags.writeable = False

    @classmethod
    def from_physical(cls, grid, values):
        values = np.ascontiguousarray(values, dtype=np.complex128)
        if values.shape != grid.shape:
            raise DomainError(
                f"physical data shape {values.shape} does not match grid {grid.shape}"
            )
        return cls(grid, values, np.fft.fftn(values, norm="ortho"))

    @classmethod
    def from_spectral(cls, grid, coefficients):
        coefficients = np.ascontiguousarray(coefficients, dtype=np.complex128)
        if coefficients.shape != grid.shape:
            raise DomainError(
                f"spectral data shape {coefficients.shape} does not match grid {grid.shape}"
            )
        return cls(grid, np.fft.ifftn(coefficients, norm="ortho"), coefficients)

    @classmethod
    def zero(cls, grid):
        z = np.zeros(grid.shape, dtype=np.complex128)
        return cls(grid, z, z.copy())

    def with_spectral(self, coefficients):
        """New field on the same grid from modified spectral data."""
        return Field.from_spectral(self.grid, coefficients)

    def is_real(self, tol=1e-12):
        scale = np.max(np.abs(self.physical)) or 1.0
        return float(np.max(np.abs(self.physical.imag))) <= tol * scale


def _require_same_grid(f, g):
    if f.grid != g.grid:
        raise DomainError("fields live on different grids")


def add(f, g):
    _require_same_grid(f, g)
    return Field(f.grid, f.physical + g.physical, f.spectral + g.spectral)


def subtract(f, g):
    _require_same_grid(f, g)
    return Field(f.grid, f.physical - g.physical, f.spectral - g.spectral)


def scale(f, c):
    return Field(f.grid, c * f.physical, c * f.spectral)


# ---------------------------------------------------------------------------
# norms


def l2_norm(f):
    """Discrete L2 norm with the cell-volume quadrature weight."""
    return math.sqrt(f.grid.cell_volume) * float(np.linalg.norm(f.spectral))


def sobolev_norm(f, theta):
    """Multiplier Sobolev norm (sum (1+|xi|^2)**theta |u_hat|^2)**(1/2)."""
    m = (1.0 + f.grid.abs_frequencies**2) ** theta
    total = np.sum(m * np.abs(f.spectral) ** 2)
    return math.sqrt(f.grid.cell_volume * float(total))


def sup_norm(f):
    return float(np.max(np.abs(f.physical)))


def gradient(f):
    """Spectral gradient: tuple of partial-derivative fields."""
    return tuple(
        f.with_spectral(1j * xi * f.spectral) for xi in f.grid.frequencies
    )


def gradient_sup_norm(f):
    """Pointwise-euclidean sup norm of the gradient."""
    parts = gradient(f)
    mag = np.sqrt(sum(np.abs(p.physical) ** 2 for p in parts))
    return float(np.max(mag))


def lip_norm(f):
    """Lipschitz norm on the grid: sup|f| + sup|grad f|."""
    return sup_norm(f) + gradient_sup_norm(f)


def inner_product(f, g):
    """Discrete L2 inner product <f, g> (conjugate-linear in g)."""
    _require_same_grid(f, g)
    return f.grid.cell_volume * complex(np.vdot(g.spectral, f.spectral))


# ---------------------------------------------------------------------------
# deterministic test-field generator


def band_limited_random(grid, shell_lo, shell_hi, seed, real=True):
    """Unit-L2 random field with spectrum in 2**shell_lo <= |xi| <= 2**shell_hi.

    Deterministic in ``seed``.  With ``real=True`` (default) the
    spectrum is Hermitian-symmetrized so the samples are real.
    """
    if shell_lo > shell_hi:
        raise DomainError(f"empty shell range [{shell_lo}, {shell_hi}]")
    hi_radius = 2.0**shell_hi
    if hi_radius >= grid.max_frequency:
        raise DomainError(
            f"shell radius 2**{shell_hi} reaches past the Nyquist magnitude "
            f"{grid.max_frequency:.6g}"
        )
    absxi = grid.abs_frequencies
    mask = (absxi >= 2.0**shell_lo) & (absxi <= hi_radius)
    if not mask.any():
        raise DomainError(
            f"no grid frequencies inside [2**{shell_lo}, 2**{shell_hi}]"
        )
    rng = np.random.default_rng(seed)
    coeffs = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    coeffs = np.where(mask, coeffs, 0.0)
    if real:
        coeffs = 0.5 * (coeffs + _reflected_conjugate(coeffs))
    f = Field.from_spectral(grid, coeffs)
    n = l2_norm(f)
    if n == 0.0:
        raise DomainError("degenerate draw: shell carried no energy")
    return scale(f, 1.0 / n)


def _reflected_conjugate(coeffs):
    """conj(c(-xi)) in FFT index layout, any dimension."""
    out = np.conj(coeffs)
    for axis in range(coeffs.ndim):
        n = coeffs.shape[axis]
        idx = (-np.arange(n)) % n
        out = np.take(out, idx, axis=axis)
    return out


def white_noise(grid, seed):
    """Real white noise, unit L2, flat expected spectrum; deterministic."""
    rng = np.random.default_rng(seed)
    samples = rng.standard_normal(grid.shape)
    f = Field.from_physical(grid, samples)
    return scale(f, 1.0 / l2_norm(f))


# ---------------------------------------------------------------------------
# I/O: text CSV and a self-describing binary container, both bit-exact


@contextmanager
def atomic_write(path, mode="w"):
    """Write to a sibling temp file, then rename over the target."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, mode, newline="" if "b" not in mode else None) as handle:
            yield handle
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_field_csv(path, f):
    """Field -> CSV (flat row-major index, re, im) with a grid header."""
    with atomic_write(path) as handle:
        handle.write("# loglip field v1\n")
        handle.write(
            f"# dim={f.grid.dim} period={f.grid.period:.17g} points={f.grid.points}\n"
        )
        writer = csv.writer(handle)
        writer.writerow(["index", "re", "im"])
        flat = f.physical.ravel()
        for i, v in enumerate(flat):
            writer.writerow([i, f"{v.real:.17g}", f"{v.imag:.17g}"])


def read_field_csv(path):
    with open(path, newline="") as handle:
        magic = handle.readline()
        if not magic.startswith("# loglip field"):
            raise DomainError(f"{path}: not a field CSV (missing header)")
        meta = {}
        for token in handle.readline().lstrip("# ").split():
            key, _, val = token.partition("=")
            meta[key] = val
        grid = GridSpec(
            dim=int(meta["dim"]), period=float(meta["period"]), points=int(meta["points"])
        )
        reader = csv.reader(handle)
        header = next(reader)
        if header != ["index", "re", "im"]:
            raise DomainError(f"{path}: unexpected columns {header!r}")
        flat = np.empty(grid.points**grid.dim, dtype=np.complex128)
        count = 0
        for row in reader:
            if not row:
                continue
            i = int(row[0])
            flat[i] = complex(float(row[1]), float(row[2]))
            count += 1
        if count != flat.size:
            raise DomainError(f"{path}: expected {flat.size} samples, got {count}")
    return Field.from_physical(grid, flat.reshape(grid.shape))


def write_field_bin(path, f):
    """Field -> self-describing .npz container (bit-exact doubles)."""
    with atomic_write(path, mode="wb") as handle:
        np.savez(
            handle,
            format=np.array("loglip-field-v1"),
            dim=np.array(f.grid.dim),
            period=np.array(f.grid.period),
            points=np.array(f.grid.points),
            physical=f.physical,
        )


def read_field_bin(path):
    with np.load(path, allow_pickle=False) as data:
        if str(data["format"]) != "loglip-field-v1":
            raise DomainError(f"{path}: unknown container format")
        grid = GridSpec(
            dim=int(data["dim"]), period=float(data["period"]), points=int(data["points"])
        )
        return Field.from_physical(grid, data["physical"])
