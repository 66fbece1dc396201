"""Tests for spectral propagation, the midpoint stepper, and time reversal."""

import math

import numpy as np
import pytest

from loglip.coefficients import (
    BorderlineEntry,
    CoefficientFamily,
    ConstantEntry,
    LinearEntry,
    SpaceModulatedEntry,
    borderline_family,
    heat_family,
)
from loglip.errors import AmplificationError, DomainError, SolverError
from loglip.evolution import (
    PropagatorCache,
    Trajectory,
    admissible_backward_solution,
    backward_residual,
    divergence_form_apply,
    forward_step_variable,
    propagate,
    read_trajectory_bin,
    time_reversed_family,
    write_trajectory_bin,
    write_trajectory_csv,
)
from loglip.grids import Field, GridSpec, band_limited_random, l2_norm, subtract

# Cumulative integrals of 1 + 0.5 t (1 - log t), frozen from
# mpmath.quad at 40 digits before the quadrature path was written.
BORDERLINE_INTEGRALS = {
    0.25: 0.29509834939249829092,
    0.7: 0.92744268063249471642,
    1.0: 1.375,
}


@pytest.fixture(scope="module")
def stepper_grid():
    return GridSpec(points=128)


class TestPropagatorCache:
    def test_zero_time_integral(self):
        cache = PropagatorCache(heat_family())
        assert cache.entry_integral(0, 0, 0.0) == 0.0

    def test_heat_integral_linear_in_t(self):
        cache = PropagatorCache(heat_family())
        for t in (0.1, 0.5, 1.0):
            assert cache.entry_integral(0, 0, t) == pytest.approx(t, rel=1e-12)

    def test_linear_entry_closed_form(self):
        fam = CoefficientFamily.isotropic(
            LinearEntry(1.0, 0.5), declared_class="lipschitz"
        )
        cache = PropagatorCache(fam)
        assert cache.entry_integral(0, 0, 1.0) == pytest.approx(1.25, rel=1e-12)

    @pytest.mark.parametrize("t", sorted(BORDERLINE_INTEGRALS))
    def test_borderline_integral_matches_reference(self, t):
        cache = PropagatorCache(borderline_family(0.5))
        assert cache.entry_integral(0, 0, t) == pytest.approx(
            BORDERLINE_INTEGRALS[t], rel=1e-10
        )

    def test_integral_nondecreasing(self):
        cache = PropagatorCache(borderline_family(0.5))
        values = [cache.entry_integral(0, 0, t) for t in np.linspace(0.0, 1.0, 11)]
        assert all(b >= a for a, b in zip(values, values[1:]))

    def test_exponent_is_quadratic_symbol(self, stepper_grid):
        cache = PropagatorCache(heat_family())
        exponent = cache.exponent(0.5, stepper_grid)
        expected = 0.5 * stepper_grid.abs_frequencies**2
        np.testing.assert_allclose(exponent, expected, rtol=1e-12)

    def test_exponent_window_heat(self, stepper_grid):
        cache = PropagatorCache(heat_family())
        lo, hi = cache.exponent_window(0.7, stepper_grid)
        assert lo == pytest.approx(1.0, rel=1e-12)
        assert hi == pytest.approx(1.0, rel=1e-12)

    def test_exponent_window_borderline_normalized(self, stepper_grid):
        cache = PropagatorCache(borderline_family(0.5))
        lo, hi = cache.exponent_window(1.0, stepper_grid)
        assert lo >= 0.5
        assert hi <= 2.0

    def test_rejects_x_dependent(self, stepper_grid):
        bump = Field.zero(stepper_grid)
        fam = CoefficientFamily.isotropic(
            SpaceModulatedEntry(ConstantEntry(1.0), bump)
        )
        with pytest.raises(DomainError):
            PropagatorCache(fam)

    def test_rejects_negative_time(self):
        cache = PropagatorCache(heat_family())
        with pytest.raises(DomainError):
            cache.entry_integral(0, 0, -0.1)


class TestPropagate:
    def test_identity_at_zero_time(self, stepper_grid):
        u = band_limited_random(stepper_grid, 0, 4, seed=1)
        out = propagate(u, heat_family(), 0.0)
        assert float(np.max(np.abs(out.spectral - u.spectral))) == 0.0

    def test_heat_single_mode_factor(self, stepper_grid):
        x = stepper_grid.positions()
        u = Field.from_physical(stepper_grid, np.cos(x))
        out = propagate(u, heat_family(), 1.0)
        np.testing.assert_allclose(
            out.physical.real, math.exp(-1.0) * np.cos(x), atol=1e-12
        )

    def test_linear_family_mode_two(self, stepper_grid):
        # a(t) = 1 + t/2 at |xi| = 2, t = 1: exponent 4 * 1.25 = 5
        fam = CoefficientFamily.isotropic(
            LinearEntry(1.0, 0.5), declared_class="lipschitz"
        )
        x = stepper_grid.positions()
        u = Field.from_physical(stepper_grid, np.cos(2 * x))
        out = propagate(u, fam, 1.0)
        np.testing.assert_allclose(
            out.physical.real, math.exp(-5.0) * np.cos(2 * x), atol=1e-12
        )

    def test_forward_multipliers_in_unit_interval(self, stepper_grid):
        cache = PropagatorCache(heat_family())
        mult = np.exp(-cache.exponent(1e-3, stepper_grid))
        assert np.all(mult > 0.0)
        assert np.all(mult <= 1.0)

    def test_round_trip_backward_forward(self, stepper_grid):
        u = band_limited_random(stepper_grid, 0, 3, seed=2)
        fam = heat_family()
        up = propagate(u, fam, 0.5, "backward")
        back = propagate(up, fam, 0.5, "forward")
        assert l2_norm(subtract(back, u)) <= 1e-10 * l2_norm(u)

    def test_round_trip_forward_backward(self, stepper_grid):
        u = band_limited_random(stepper_grid, 0, 3, seed=3)
        fam = heat_family()
        down = propagate(u, fam, 0.5, "forward")
        back = propagate(down, fam, 0.5, "backward")
        assert l2_norm(subtract(back, u)) <= 1e-10 * l2_norm(u)

    def test_backward_overflow_names_radius(self, stepper_grid):
        # exact spectral deltas: only modes |xi| in {1, 40} are nonzero
        spec = np.zeros(stepper_grid.shape, dtype=np.complex128)
        spec[1] = spec[-1] = 1.0
        spec[40] = spec[-40] = 1.0
        u = Field.from_spectral(stepper_grid, spec)
        with pytest.raises(AmplificationError) as info:
            propagate(u, heat_family(), 1.0, "backward")
        assert info.value.offending_xi == pytest.approx(40.0, abs=1e-9)
        assert info.value.required_radius == pytest.approx(40.0, abs=1e-9)

    def test_rejects_unknown_direction(self, stepper_grid):
        with pytest.raises(DomainError):
            propagate(Field.zero(stepper_grid), heat_family(), 0.1, "sideways")


class TestTrajectory:
    def test_validation(self, stepper_grid):
        f = Field.zero(stepper_grid)
        with pytest.raises(DomainError):
            Trajectory(times=(), fields=())
        with pytest.raises(DomainError):
            Trajectory(times=(0.0, 0.0), fields=(f, f))
        with pytest.raises(DomainError):
            Trajectory(times=(0.0, 1.0), fields=(f, Field.zero(GridSpec(points=64))))

    def test_norm_rows(self, stepper_grid):
        u = band_limited_random(stepper_grid, 0, 3, seed=4)
        traj = Trajectory(times=(0.0, 1.0), fields=(u, u))
        rows = traj.norm_rows()
        assert rows[0][1] == pytest.approx(1.0, rel=1e-12)
        assert rows[0][2] >= rows[0][1]

    def test_csv_round_trip(self, stepper_grid, tmp_path):
        u = band_limited_random(stepper_grid, 0, 3, seed=5)
        traj = Trajectory(times=(0.0, 0.5), fields=(u, propagate(u, heat_family(), 0.5)))
        path = tmp_path / "traj.csv"
        write_trajectory_csv(path, traj)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "t,l2,h1"
        t, l2, h1 = map(float, lines[1].split(","))
        assert (t, l2) == (0.0, pytest.approx(1.0, rel=1e-12))

    def test_bin_round_trip(self, stepper_grid, tmp_path):
        u = band_limited_random(stepper_grid, 0, 3, seed=6)
        traj = Trajectory(times=(0.0, 0.5), fields=(u, propagate(u, heat_family(), 0.5)))
        path = tmp_path / "traj.npz"
        write_trajectory_bin(path, traj)
        loaded = read_trajectory_bin(path)
        assert loaded.times == traj.times
        for a, b in zip(loaded.fields, traj.fields):
            assert np.array_equal(a.physical, b.physical)


class TestStepper:
    def test_constant_in_x_untouched(self, stepper_grid):
        x = stepper_grid.positions()
        bump = Field.from_physical(stepper_grid, 0.3 * np.sin(x))
        fam = CoefficientFamily.isotropic(
            SpaceModulatedEntry(ConstantEntry(1.0), bump), kappa=0.5
        )
        u0 = Field.from_physical(stepper_grid, np.full(stepper_grid.shape, 2.0))
        traj = forward_step_variable(u0, fam, 0.2, 20)
        for f in traj.fields:
            assert float(np.max(np.abs(f.physical - 2.0))) <= 1e-12

    def test_matches_exact_propagator(self, stepper_grid):
        u0 = band_limited_random(stepper_grid, 0, 2, seed=3)
        exact = propagate(u0, heat_family(), 0.5)
        traj = forward_step_variable(u0, heat_family(), 0.5, 200)
        err = l2_norm(subtract(traj.fields[-1], exact)) / l2_norm(exact)
        assert err <= 5e-6

    def test_second_order_convergence(self, stepper_grid):
        u0 = band_limited_random(stepper_grid, 0, 2, seed=3)
        exact = propagate(u0, heat_family(), 0.5)
        errors = []
        for steps in (25, 50, 100, 200):
            traj = forward_step_variable(u0, heat_family(), 0.5, steps)
            errors.append(l2_norm(subtract(traj.fields[-1], exact)) / l2_norm(exact))
        ratios = [a / b for a, b in zip(errors, errors[1:])]
        assert all(3.5 <= r <= 4.5 for r in ratios)

    def test_norms_nonincreasing(self, stepper_grid):
        u0 = band_limited_random(stepper_grid, 0, 4, seed=9)
        traj = forward_step_variable(u0, heat_family(), 0.5, 100)
        norms = [l2_norm(f) for f in traj.fields]
        for a, b in zip(norms, norms[1:]):
            assert b <= a * (1 + 1e-8)

    def test_solver_stagnation_reported(self, stepper_grid):
        u0 = band_limited_random(stepper_grid, 0, 5, seed=10)
        with pytest.raises(SolverError) as info:
            forward_step_variable(u0, heat_family(), 1.0, 2, max_iterations=1)
        assert info.value.residual is not None
        assert info.value.residual > 0.0

    def test_rejects_bad_arguments(self, stepper_grid):
        u0 = Field.zero(stepper_grid)
        with pytest.raises(DomainError):
            forward_step_variable(u0, heat_family(), 0.0, 10)
        with pytest.raises(DomainError):
            forward_step_variable(u0, heat_family(), 1.0, 0)


class TestTimeReversal:
    def test_reversed_values(self):
        fam = borderline_family(0.5)
        rev = time_reversed_family(fam, 1.0)
        for t in (0.0, 0.3, 1.0):
            assert rev.entries[0][0].value(t) == pytest.approx(
                fam.entries[0][0].value(1.0 - t), rel=1e-15
            )

    def test_double_reversal_identity(self):
        fam = borderline_family(0.5)
        double = time_reversed_family(time_reversed_family(fam, 1.0), 1.0)
        for t in (0.1, 0.6):
            assert double.entries[0][0].value(t) == pytest.approx(
                fam.entries[0][0].value(t), rel=1e-15
            )

    def test_space_part_shared(self, stepper_grid):
        x = stepper_grid.positions()
        bump = Field.from_physical(stepper_grid, 0.3 * np.sin(x))
        fam = CoefficientFamily.isotropic(
            SpaceModulatedEntry(BorderlineEntry(), bump), kappa=0.5
        )
        rev = time_reversed_family(fam, 1.0)
        assert rev.entries[0][0].space_field is bump


class TestBackwardSolutions:
    def test_degenerate_horizon(self, stepper_grid):
        u = band_limited_random(stepper_grid, 0, 3, seed=11)
        traj = admissible_backward_solution(u, heat_family(), 0.0)
        assert traj.times == (0.0,)
        assert traj.fields[0] is u

    def test_single_mode_amplitudes(self, stepper_grid):
        x = stepper_grid.positions()
        final = Field.from_physical(stepper_grid, np.cos(x))
        traj = admissible_backward_solution(final, heat_family(), 1.0, steps=10)
        for t, f in zip(traj.times, traj.fields):
            amp = float(np.max(np.abs(f.physical.real)))
            assert amp == pytest.approx(math.exp(-(1.0 - t)), rel=1e-10)
        norms = [l2_norm(f) for f in traj.fields]
        assert all(b >= a for a, b in zip(norms, norms[1:]))

    def test_hits_final_data(self, stepper_grid):
        final = band_limited_random(stepper_grid, 0, 3, seed=12)
        traj = admissible_backward_solution(final, heat_family(), 0.5, steps=8)
        assert l2_norm(subtract(traj.fields[-1], final)) <= 1e-12

    def test_consistent_with_backward_propagation(self, stepper_grid):
        final = band_limited_random(stepper_grid, 0, 2, seed=13)
        traj = admissible_backward_solution(final, heat_family(), 0.5, steps=4)
        stepped = propagate(traj.fields[0], heat_family(), traj.times[2], "backward")
        assert l2_norm(subtract(stepped, traj.fields[2])) <= 1e-10

    def test_residual_smooth_run(self, stepper_grid):
        final = band_limited_random(stepper_grid, 0, 1, seed=5)
        traj = admissible_backward_solution(final, heat_family(), 0.5, steps=400)
        assert backward_residual(traj, heat_family()) <= 1e-5

    def test_residual_x_dependent_route(self, stepper_grid):
        x = stepper_grid.positions()
        bump = Field.from_physical(stepper_grid, 0.3 * np.sin(x))
        fam = CoefficientFamily.isotropic(
            SpaceModulatedEntry(ConstantEntry(1.0), bump), kappa=0.5
        )
        final = band_limited_random(stepper_grid, 0, 1, seed=7)
        traj = admissible_backward_solution(final, fam, 0.5, steps=600)
        assert backward_residual(traj, fam) <= 1e-5

    def test_divergence_form_heat_is_laplacian(self, stepper_grid):
        x = stepper_grid.positions()
        u = Field.from_physical(stepper_grid, np.sin(3 * x))
        lu = divergence_form_apply(heat_family(), 0.0, u)
        np.testing.assert_allclose(lu.physical.real, -9.0 * np.sin(3 * x), atol=1e-10)
