"""Solution generators for the forward and backward diffusion flows.

For x-independent coefficient families the flow is diagonal in Fourier:
each mode carries the factor ``exp(-A(t, xi))`` with the cumulative
symbol ``A(t, xi) = sum_jk (int_0^t a_jk) xi_j xi_k``.  The cumulative
entry integrals are evaluated by adaptive quadrature (closed forms exist
only for the simplest families) and cached, so propagation is exact up
to quadrature tolerance.  Backward propagation multiplies by
``exp(+A)`` and refuses — rather than clamps — any retained mode that
would overflow, naming the offending frequency and the largest safe
truncation radius; deciding what to cut is the caller's job.

For x-dependent families a forward implicit-midpoint stepper is
provided: derivatives are spectral, coefficient multiplication is
pointwise, and the inner solves use conjugate gradients with a constant
-coefficient spectral preconditioner.  Backward trajectories come from
time reversal: running the forward stepper with the time-reversed
coefficients and reading the result backwards solves the backward
equation exactly (the substitution t -> T - t swaps the two).
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.sparse.linalg import LinearOperator, cg

from .coefficients import CoefficientFamily, SpaceModulatedEntry
from .errors import AmplificationError, DomainError, QuadratureError, SolverError
from .grids import Field, atomic_write, l2_norm, sobolev_norm

_LOG_SAFE = 700.0


class PropagatorCache:
    """Cumulative entry integrals for an x-independent family.

    ``exponent(t, grid)`` assembles A(t, xi) on the grid from the cached
    scalar integrals, so repeated propagation at shared times costs one
    quadrature per entry.
    """

    def __init__(self, family, rel_tol=1e-10):
        if family.x_dependent:
            raise DomainError("spectral propagation needs x-independent coefficients")
        self.family = family
        self.rel_tol = rel_tol
        self._integrals = {}

    def entry_integral(self, j, k, t):
        """int_0^t a_jk(s) ds, cached per (j, k, t)."""
        if t < 0.0:
            raise DomainError(f"time must be nonnegative, got {t!r}")
        key = (j, k, float(t))
        if key not in self._integrals:
            if t == 0.0:
                self._integrals[key] = 0.0
            else:
                entry = self.family.entries[j][k]
                value, abserr = quad(
                    entry.value, 0.0, t,
                    epsabs=1e-14, epsrel=self.rel_tol, limit=200,
                )
                if abserr > 10.0 * (self.rel_tol * abs(value) + 1e-13):
                    raise QuadratureError(
                        f"entry integral on [0, {t:g}] reached only "
                        f"abserr {abserr:.3g}",
                        achieved=abserr,
                    )
                self._integrals[key] = value
        return self._integrals[key]

    def exponent(self, t, grid):
        """A(t, xi) on the grid's frequency layout."""
        freqs = grid.frequencies
        acc = np.zeros(grid.shape)
        for j in range(self.family.dim):
            for k in range(self.family.dim):
                acc = acc + self.entry_integral(j, k, t) * freqs[j] * freqs[k]
        return acc

    def exponent_window(self, t, grid):
        """(min, max) of A(t, xi)/(t |xi|^2) over nonzero modes.

        Families under the reconstruction normalization stay inside
        [1/2, 2].
        """
        if t <= 0.0:
            raise DomainError(f"window needs t > 0, got {t!r}")
        absxi = grid.abs_frequencies
        mask = absxi > 0.0
        ratio = self.exponent(t, grid)[mask] / (t * absxi[mask] ** 2)
        return float(np.min(ratio)), float(np.max(ratio))


def propagate(u0, family, t, direction="forward", cache=None):
    """Diagonal spectral propagation by exp(-A) (forward) or exp(+A).

    Backward propagation raises AmplificationError if any mode with
    nonzero amplitude would overflow; the error names the smallest
    offending |xi| — truncating strictly below it makes the request
    representable.  Only exactly-zero coefficients are skipped:
    roundoff-level dust overflows just as genuinely, and sharp
    truncation produces exact zeros, so cleanly truncated data never
    trips the check.
    """
    if direction not in ("forward", "backward"):
        raise DomainError(f"direction must be forward or backward, got {direction!r}")
    cache = cache if cache is not None else PropagatorCache(family)
    exponent = cache.exponent(t, u0.grid)
    if direction == "forward":
        return u0.with_spectral(u0.spectral * np.exp(-exponent))
    spec = u0.spectral
    mask = spec != 0.0
    budget = exponent[mask] + np.log(np.abs(spec[mask]))
    over = budget > _LOG_SAFE
    if np.any(over):
        absxi = u0.grid.abs_frequencies[mask][over]
        radius = float(np.min(absxi))
        raise AmplificationError(
            f"backward propagation to t={t:g} overflows at {int(np.sum(over))} "
            f"mode(s); smallest offending |xi| = {radius:g}",
            offending_xi=radius,
            required_radius=radius,
        )
    out = np.zeros_like(spec)
    out[mask] = spec[mask] * np.exp(exponent[mask])
    return u0.with_spectral(out)


# ---------------------------------------------------------------------------
# trajectories


@dataclass(frozen=True)
class Trajectory:
    """Fields sampled along strictly increasing times on one grid."""

    times: tuple
    fields: tuple

    def __post_init__(self):
        if len(self.times) != len(self.fields) or not self.times:
            raise DomainError("trajectory needs matching, nonempty times and fields")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise DomainError("trajectory times must be strictly increasing")
        grid = self.fields[0].grid
        if any(f.grid != grid for f in self.fields):
            raise DomainError("trajectory fields must share one grid")

    @property
    def grid(self):
        return self.fields[0].grid

    def norm_rows(self):
        """(t, |u|_{L^2}, |u|_{H^1}) per snapshot."""
        return [
            (t, l2_norm(f), sobolev_norm(f, 1.0))
            for t, f in zip(self.times, self.fields)
        ]


def write_trajectory_csv(path, traj):
    """Plot-ready norm history: t, l2, h1."""
    with atomic_write(path) as handle:
        handle.write("t,l2,h1\n")
        for t, l2, h1 in traj.norm_rows():
            handle.write(f"{t:.17g},{l2:.17g},{h1:.17g}\n")


def write_trajectory_bin(path, traj):
    """Full-field snapshots in one compressed container."""
    grid = traj.grid
    np.savez_compressed(
        path,
        format="loglip-trajectory-v1",
        dim=grid.dim,
        period=grid.period,
        points=grid.points,
        times=np.asarray(traj.times),
        physical=np.stack([f.physical for f in traj.fields]),
    )


def read_trajectory_bin(path):
    from .grids import GridSpec

    with np.load(path) as data:
        if str(data["format"]) != "loglip-trajectory-v1":
            raise DomainError(f"{path}: not a trajectory container")
        grid = GridSpec(
            dim=int(data["dim"]), period=float(data["period"]),
            points=int(data["points"]),
        )
        times = tuple(float(t) for t in data["times"])
        fields = tuple(Field.from_physical(grid, snap) for snap in data["physical"])
    return Trajectory(times=times, fields=fields)


# ---------------------------------------------------------------------------
# variable-coefficient stepper


def divergence_form_apply(family, t, f):
    """sum_j d_j (a_jk(t, .) d_k f), derivatives spectral, products pointwise."""
    grid = f.grid
    profiles = family.profile_matrix(t, grid)
    freqs = grid.frequencies
    grads = [
        np.fft.ifftn(1j * freqs[k] * f.spectral, norm="ortho")
        for k in range(grid.dim)
    ]
    acc = np.zeros(grid.shape, dtype=np.complex128)
    for j in range(grid.dim):
        flux = sum(profiles[j][k] * grads[k] for k in range(grid.dim))
        acc = acc + 1j * freqs[j] * np.fft.fftn(flux, norm="ortho")
    return f.with_spectral(acc)


def _step_operator(family, t, grid, half_dt):
    """matvec for I - half_dt * L plus its spectral preconditioner."""
    freqs = grid.frequencies
    shape, size = grid.shape, grid.points**grid.dim

    profiles = family.profile_matrix(t, grid)
    means = [
        [float(np.mean(profiles[j][k].real)) for k in range(grid.dim)]
        for j in range(grid.dim)
    ]
    mean_symbol = np.zeros(shape)
    for j in range(grid.dim):
        for k in range(grid.dim):
            mean_symbol = mean_symbol + means[j][k] * freqs[j] * freqs[k]
    precond_symbol = 1.0 / (1.0 + half_dt * np.maximum(mean_symbol, 0.0))

    def apply_l(spec):
        grads = [
            np.fft.ifftn(1j * freqs[k] * spec, norm="ortho") for k in range(grid.dim)
        ]
        acc = np.zeros(shape, dtype=np.complex128)
        for j in range(grid.dim):
            flux = sum(profiles[j][k] * grads[k] for k in range(grid.dim))
            acc = acc + 1j * freqs[j] * np.fft.fftn(flux, norm="ortho")
        return acc

    def matvec(vec):
        spec = vec.reshape(shape)
        return (spec - half_dt * apply_l(spec)).ravel()

    def precond(vec):
        return (precond_symbol * vec.reshape(shape)).ravel()

    op = LinearOperator((size, size), matvec=matvec, dtype=np.complex128)
    pre = LinearOperator((size, size), matvec=precond, dtype=np.complex128)
    return op, pre, apply_l


def forward_step_variable(u0, family, T, steps, solve_rtol=1e-10,
                          max_iterations=400):
    """Implicit-midpoint trajectory of the forward equation on [0, T].

    Each step solves (I - dt/2 L) u_next = (I + dt/2 L) u_n by conjugate
    gradients in spectral space; stagnation raises SolverError with the
    final relative residual.
    """
    if T <= 0.0:
        raise DomainError(f"final time must be positive, got {T!r}")
    if steps < 1:
        raise DomainError(f"need at least one step, got {steps!r}")
    grid = u0.grid
    dt = T / steps
    times = [i * dt for i in range(steps + 1)]
    fields = [u0]
    current = u0.spectral
    for n in range(steps):
        t_mid = (times[n] + times[n + 1]) / 2.0
        op, pre, apply_l = _step_operator(family, t_mid, grid, dt / 2.0)
        rhs = (current + (dt / 2.0) * apply_l(current)).ravel()
        solution, info = cg(
            op, rhs, x0=current.ravel(), rtol=solve_rtol, atol=0.0,
            maxiter=max_iterations, M=pre,
        )
        if info != 0:
            residual = float(
                np.linalg.norm(op.matvec(solution) - rhs) / np.linalg.norm(rhs)
            )
            raise SolverError(
                f"midpoint solve stagnated at step {n} (info={info})",
                residual=residual,
            )
        current = solution.reshape(grid.shape)
        fields.append(Field.from_spectral(grid, current))
    return Trajectory(times=tuple(times), fields=tuple(fields))


# ---------------------------------------------------------------------------
# backward solutions by time reversal


@dataclass(frozen=True)
class _ReversedEntry:
    base: object
    horizon: float

    x_dependent = False

    def value(self, t):
        return self.base.value(self.horizon - t)

    def values(self, ts):
        return self.base.values(self.horizon - np.asarray(ts, dtype=np.float64))


def time_reversed_family(family, horizon):
    """Coefficients a(T - t): forward evolution with these, read backwards,
    solves the backward equation with the originals."""
    cache = {}

    def flip(entry):
        if id(entry) not in cache:
            if entry.x_dependent:
                cache[id(entry)] = SpaceModulatedEntry(
                    time_entry=_ReversedEntry(entry.time_entry, horizon),
                    space_field=entry.space_field,
                )
            else:
                cache[id(entry)] = _ReversedEntry(entry, horizon)
        return cache[id(entry)]

    rows = tuple(tuple(flip(e) for e in row) for row in family.entries)
    return CoefficientFamily(
        dim=family.dim, entries=rows, kappa=family.kappa,
        declared_class=family.declared_class,
        label=f"{family.label}+reversed" if family.label else "reversed",
    )


def admissible_backward_solution(final_data, family, T, steps=200):
    """A backward-equation trajectory hitting ``final_data`` at time T.

    x-independent families use the exact spectral route: mode factors
    exp(A(t) - A(T)) <= 1, so no amplification ever occurs.  x-dependent
    families run the forward stepper on the reversed coefficients.
    """
    if T < 0.0:
        raise DomainError(f"final time must be nonnegative, got {T!r}")
    if T == 0.0:
        return Trajectory(times=(0.0,), fields=(final_data,))
    if not family.x_dependent:
        cache = PropagatorCache(family)
        grid = final_data.grid
        top = cache.exponent(T, grid)
        times = tuple(i * (T / steps) for i in range(steps + 1))
        fields = tuple(
            final_data.with_spectral(
                final_data.spectral * np.exp(cache.exponent(t, grid) - top)
            )
            for t in times
        )
        return Trajectory(times=times, fields=fields)
    forward = forward_step_variable(final_data, time_reversed_family(family, T),
                                    T, steps)
    return Trajectory(times=forward.times,
                      fields=tuple(reversed(forward.fields)))


def backward_residual(traj, family):
    """Discrete L^2(0,T; L^2) residual of the backward equation.

    Centered time differences at interior snapshots against the
    divergence-form operator; small values certify the trajectory solves
    the backward flow at its own resolution.
    """
    if len(traj.times) < 3:
        raise DomainError("residual check needs at least three snapshots")
    total = 0.0
    for n in range(1, len(traj.times) - 1):
        dt = traj.times[n + 1] - traj.times[n - 1]
        du_dt = (traj.fields[n + 1].spectral - traj.fields[n - 1].spectral) / dt
        lu = divergence_form_apply(family, traj.times[n], traj.fields[n])
        r = traj.fields[n].with_spectral(du_dt + lu.spectral)
        weight = (traj.times[n + 1] - traj.times[n - 1]) / 2.0
        total += weight * l2_norm(r) ** 2
    return math.sqrt(total)
