"""Weighted energy-estimate harness tests.

Reference values were computed with mpmath at 40 digits before the
harness arithmetic was written: the weight exponent by direct adaptive
quadrature of exp(z**(-lam)-1) on [y, 1], norms from the closed-form
single-mode expressions, and the trapezoid sums replicated
node-for-node in extended precision.  The package's own weight
quadrature runs at 1e-10 relative tolerance, and that error enters the
estimate exponentiated (absolute exponent error ~ |W| * 1e-10), so the
comparison tolerances below scale with the exponent magnitude of each
regime: |W| ~ 3 for the smooth case, ~950 for the overflow case.
"""

import math
from dataclasses import replace

import numpy as np
import pytest

from loglip import energy
from loglip.coefficients import borderline_family, heat_family
from loglip.energy import (
    EnergyReport,
    GAMMA_LADDER,
    build_corpus,
    gamma_scan,
    log_weight_delta,
    scan_report,
    verify_estimate,
    weighted_lhs,
    weighted_rhs_bracket,
    weighted_sides,
    write_scan_report,
)
from loglip.errors import (
    DomainError,
    EmptyInputError,
    InvariantViolation,
    RangeError,
)
from loglip.evolution import Trajectory, admissible_backward_solution
from loglip.grids import Field, GridSpec
from loglip.serialize import json_text
from loglip.weights import WeightParams, stability_thresholds

# single mode xi=3, amplitude 2, heat flow, T=1, trapezoid on j/64
LHS_TRAP_64 = 0.0032871785505187404
RHS_TERM1 = 0.21167090180157988
RHS_TERM2 = 2.1007557569560157e-05
RATIO_SMOOTH_64 = 0.03105625113845823
M_SMOOTH_64 = 0.032364259847324786
LHS_TRUE = 0.0032734121402462806  # mpmath.quad of the exact integrand
RATIO_G1000_64 = 1.7361111111111866e-06
M_G1000_64 = 1.9455252918288304e-06
RATIO_OVERFLOW_64 = 1.1846350680017048e-05
# 16*log(2)**2*(sigma+tau)/(rate*(1+log 2)) at (kappa, alpha, sigma, tau) =
# (1, 1, 1, 0.25) and (2/3, 1, 1, 0.25)
FLOOR_K1 = 32.7507112680287
FLOOR_K23 = 49.12606690204305
MAT_FALLBACK = 5.2584945414548045e+305  # 1e-20 * e^750

SMOOTH = WeightParams(lam=1.2, beta=5.0, gamma=0.5, tau=4.0, sigma=1.0,
                      alpha=1.0, T=1.0)
OVERFLOW = WeightParams(lam=1.5, beta=1.25, gamma=1.0, tau=0.25, sigma=1.0,
                        alpha=1.0, T=1.0)
STEEP = replace(OVERFLOW, lam=6.0)


def single_mode_trajectory(steps, mode=3, amplitude=2.0, points=128):
    grid = GridSpec(dim=1, points=points)
    spec = np.zeros(grid.shape, dtype=np.complex128)
    spec[mode] = amplitude * math.sqrt(points)  # physical amplitude*exp(i*mode*x)
    final = Field.from_spectral(grid, spec)
    return admissible_backward_solution(final, heat_family(1), 1.0, steps)


@pytest.fixture(scope="module")
def mode_traj_64():
    return single_mode_trajectory(64)


class TestLogWeightDelta:
    def test_plain_exponential_weights(self):
        # vanished inner parts: the difference is just the base difference
        assert log_weight_delta((3.5, -math.inf), (1.25, -math.inf)) == 2.25

    def test_materialized_inner_parts(self):
        d = log_weight_delta((0.0, math.log(3.0)), (1.0, math.log(2.0)))
        assert d == pytest.approx(0.0, abs=1e-15)

    def test_equal_huge_inner_parts_cancel(self):
        assert log_weight_delta((5.0, 1e22), (1.0, 1e22)) == 4.0

    def test_saturation_sign(self):
        assert log_weight_delta((0.0, 800.0), (100.0, 700.0)) == math.inf
        assert log_weight_delta((100.0, 700.0), (0.0, 800.0)) == -math.inf

    def test_tier_branch_matches_direct_subtraction(self):
        # 694/695 are above the tier threshold yet still materialize, so
        # the log1p route must agree with the direct difference
        d = log_weight_delta((0.0, 695.0), (0.0, 694.0))
        direct = math.exp(695.0) - math.exp(694.0)
        assert d == pytest.approx(direct, rel=1e-12)

    @pytest.mark.parametrize(
        "a,b",
        [
            ((0.0, 5.0), (2.0, 3.0)),
            ((1.0, -math.inf), (0.0, 2.0)),
            ((0.0, 700.5), (3.0, 699.0)),
            ((2.5, 1e20), (0.0, 2e20)),
        ],
    )
    def test_antisymmetric(self, a, b):
        fwd, rev = log_weight_delta(a, b), log_weight_delta(b, a)
        if math.isinf(fwd):
            assert rev == -fwd
        else:
            assert rev == pytest.approx(-fwd, rel=1e-12, abs=1e-12)


class TestSmoothRegime:
    """lam=1.2 with tau=4: weight exponents stay near 1, everything
    materializes, and the mpmath trapezoid replica pins every digit."""

    def test_lhs_matches_reference(self, mode_traj_64):
        assert weighted_lhs(mode_traj_64, SMOOTH, 0.5) == pytest.approx(
            LHS_TRAP_64, rel=1e-8
        )

    def test_rhs_matches_reference(self, mode_traj_64):
        assert weighted_rhs_bracket(mode_traj_64, SMOOTH, 0.5) == pytest.approx(
            RHS_TERM1 + RHS_TERM2, rel=1e-8
        )

    def test_lhs_at_zero_is_empty_integral(self, mode_traj_64):
        assert weighted_lhs(mode_traj_64, SMOOTH, 0.0) == 0.0

    def test_trapezoid_second_order_toward_true_integral(self):
        errors = []
        for steps in (128, 256, 512):
            traj = single_mode_trajectory(steps)
            value = weighted_lhs(traj, SMOOTH, 0.5)
            errors.append(abs(value - LHS_TRUE) / LHS_TRUE)
        assert errors[-1] <= 1e-4
        for coarse, fine in zip(errors, errors[1:]):
            assert 3.8 <= coarse / fine <= 4.2

    def test_verify_ratio_and_constant(self, mode_traj_64):
        report = verify_estimate([mode_traj_64], SMOOTH)
        assert report.empirical_M == pytest.approx(M_SMOOTH_64, rel=1e-8)
        at_half = next(r for r in report.records if abs(r.s - 0.5) < 1e-12)
        assert at_half.ratio == pytest.approx(RATIO_SMOOTH_64, rel=1e-8)
        peak = max(report.records, key=lambda r: r.ratio)
        assert peak.s == pytest.approx(0.28125, abs=1e-12)

    def test_records_materialize_consistently(self, mode_traj_64):
        report = verify_estimate([mode_traj_64], SMOOTH)
        for rec in report.records:
            assert rec.lhs is not None and rec.rhs is not None
            rebuilt = rec.lhs_scaled * math.exp(
                rec.scale_base + math.exp(rec.scale_wlog)
            )
            assert rebuilt == pytest.approx(rec.lhs, rel=1e-12, abs=1e-300)
            if rec.s > 0:
                assert rec.lhs == pytest.approx(
                    weighted_lhs(mode_traj_64, SMOOTH, rec.s), rel=1e-12
                )


class TestLargeGammaRegime:
    """gamma=1000 overflows both sides linearly while the inner weight
    exponents stay tiny: the base level carries everything."""

    def test_ratio_and_constant(self, mode_traj_64):
        p = replace(SMOOTH, gamma=1000.0)
        sides = weighted_sides(mode_traj_64, p, 0.5)
        ratio = sides.lhs_scaled / (p.gamma * sides.rhs_scaled)
        assert ratio == pytest.approx(RATIO_G1000_64, rel=1e-8)
        report = verify_estimate([mode_traj_64], p)
        assert report.empirical_M == pytest.approx(M_G1000_64, rel=1e-8)
        peak = max(report.records, key=lambda r: r.ratio)
        assert peak.s == pytest.approx(1.0 / 64.0, abs=1e-12)

    def test_materialization_overflows(self, mode_traj_64):
        p = replace(SMOOTH, gamma=1000.0)
        with pytest.raises(RangeError):
            weighted_lhs(mode_traj_64, p, 0.5)
        report = verify_estimate([mode_traj_64], p)
        assert any(r.lhs is None and r.rhs is None for r in report.records)
        assert all(math.isfinite(r.ratio) for r in report.records)


class TestOverflowRegime:
    """lam=1.5 at the beta floor: log-weights near 950, far past double
    range, but the inner exponents (wlog ~ 6.86) still subtract exactly."""

    def test_ratio_matches_reference(self, mode_traj_64):
        sides = weighted_sides(mode_traj_64, OVERFLOW, 0.5)
        ratio = sides.lhs_scaled / (OVERFLOW.gamma * sides.rhs_scaled)
        assert ratio == pytest.approx(RATIO_OVERFLOW_64, rel=5e-6)
        assert sides.scale_wlog == pytest.approx(6.856298550431408, rel=1e-9)

    def test_constant_and_unmaterializable_records(self, mode_traj_64):
        report = verify_estimate([mode_traj_64], OVERFLOW)
        assert report.empirical_M == pytest.approx(RATIO_OVERFLOW_64, rel=5e-6)
        for rec in report.records:
            if rec.s > 0:
                assert rec.lhs is None and rec.rhs is None
                assert rec.ratio == pytest.approx(RATIO_OVERFLOW_64, rel=5e-6)

    def test_materialized_sides_raise(self, mode_traj_64):
        with pytest.raises(RangeError):
            weighted_lhs(mode_traj_64, OVERFLOW, 0.5)
        with pytest.raises(RangeError):
            weighted_rhs_bracket(mode_traj_64, OVERFLOW, 0.5)


class TestShiftInvariance:
    @pytest.mark.parametrize("params", [SMOOTH, OVERFLOW], ids=["smooth", "overflow"])
    @pytest.mark.parametrize("shift", [-37.5, 12.25, 300.0])
    def test_ratio_unchanged_by_rescaling_shift(self, mode_traj_64, params, shift):
        plain = weighted_sides(mode_traj_64, params, 0.5)
        moved = weighted_sides(mode_traj_64, params, 0.5, log_shift=shift)
        r0 = plain.lhs_scaled / plain.rhs_scaled
        r1 = moved.lhs_scaled / moved.rhs_scaled
        assert r1 == pytest.approx(r0, rel=1e-10)

    def test_overflowing_shift_raises(self, mode_traj_64):
        with pytest.raises(RangeError):
            weighted_sides(mode_traj_64, SMOOTH, 0.5, log_shift=800.0)


class TestSteepConcentration:
    """lam=6: the data term's weight exceeds every other weight by
    factors beyond exp(1e4); all other factors underflow to exactly zero
    and the reported constant is exactly 0.0."""

    def test_constant_exactly_zero(self, mode_traj_64):
        report = verify_estimate([mode_traj_64], STEEP)
        assert report.empirical_M == 0.0
        assert report.records  # evaluations happened, all with zero ratio
        assert all(r.ratio == 0.0 for r in report.records)
        assert all(r.rhs_scaled > 0.0 for r in report.records)

    def test_ratio_stable_under_doubled_steepness(self, mode_traj_64):
        report = verify_estimate([mode_traj_64], replace(STEEP, lam=12.0))
        assert report.empirical_M == 0.0

    def test_bracket_not_materializable(self, mode_traj_64):
        with pytest.raises(RangeError):
            weighted_rhs_bracket(mode_traj_64, STEEP, 0.5)


class TestDomainChecks:
    def test_s_off_grid(self, mode_traj_64):
        with pytest.raises(DomainError):
            weighted_lhs(mode_traj_64, SMOOTH, 0.333)

    def test_s_beyond_window(self, mode_traj_64):
        with pytest.raises(DomainError):
            weighted_lhs(mode_traj_64, SMOOTH, 2.0)

    def test_trajectory_must_start_at_zero(self, mode_traj_64):
        clipped = Trajectory(
            times=mode_traj_64.times[1:], fields=mode_traj_64.fields[1:]
        )
        with pytest.raises(DomainError):
            weighted_lhs(clipped, SMOOTH, 0.5)

    def test_empty_corpus(self):
        with pytest.raises(EmptyInputError):
            verify_estimate([], SMOOTH)

    @pytest.mark.filterwarnings("ignore:invalid value:RuntimeWarning")
    def test_non_finite_field_is_flagged(self, mode_traj_64):
        grid = mode_traj_64.grid
        spec = np.zeros(grid.shape, dtype=np.complex128)
        spec[1] = np.inf
        bad = Field.from_spectral(grid, spec)
        traj = Trajectory(
            times=mode_traj_64.times,
            fields=(bad,) * len(mode_traj_64.times),
        )
        with pytest.raises(InvariantViolation):
            verify_estimate([traj], SMOOTH)


class TestZeroSolution:
    def test_report_empty_but_valid(self):
        grid = GridSpec(dim=1, points=128)
        times = tuple(i / 16.0 for i in range(17))
        traj = Trajectory(times=times, fields=tuple(Field.zero(grid) for _ in times))
        report = verify_estimate([traj], SMOOTH)
        assert isinstance(report, EnergyReport)
        assert report.records == ()
        assert report.empirical_M == 0.0


class TestMaterializeInternals:
    def test_fallback_when_scale_alone_overflows(self):
        # scale e^750 is past double range, the product is not
        value = energy._materialize(1e-20, 750.0, -math.inf)
        assert value == pytest.approx(MAT_FALLBACK, rel=1e-12)

    def test_zero_scaled_short_circuits(self):
        assert energy._materialize(0.0, 1e30, 1e30) == 0.0


@pytest.fixture(scope="module")
def small_corpus():
    grid = GridSpec(dim=1, points=128)
    return build_corpus(heat_family(1), grid, count=4, final_time=1.0,
                        seed=11, steps=32)


class TestCorpusAndScan:
    def test_descriptor_and_seeds(self, small_corpus):
        solutions, descriptor, seeds = small_corpus
        assert len(solutions) == 4
        assert seeds == [11, 12, 13, 14]
        assert descriptor["family"] == "heat"
        assert descriptor["count"] == 4
        assert len(descriptor["shells"]) == 4
        for lo, hi in descriptor["shells"]:
            assert 0 <= lo <= hi
            assert 2.0**hi < 64.0  # inside the grid's resolvable band

    def test_deterministic_rebuild(self, small_corpus):
        solutions, descriptor, seeds = small_corpus
        grid = GridSpec(dim=1, points=128)
        again, descriptor2, seeds2 = build_corpus(
            heat_family(1), grid, count=4, final_time=1.0, seed=11, steps=32
        )
        assert descriptor2 == descriptor and seeds2 == seeds
        first = scan_report(solutions, SMOOTH, descriptor, seeds)
        second = scan_report(again, SMOOTH, descriptor2, seeds2)
        assert json_text(first) == json_text(second)

    def test_gamma_scan_structure(self, small_corpus):
        solutions, _, _ = small_corpus
        scan = gamma_scan(solutions, SMOOTH)
        assert tuple(g for g, _ in scan) == GAMMA_LADDER
        for _, report in scan:
            assert math.isfinite(report.empirical_M)
            assert report.empirical_M >= 0.0

    def test_scan_report_layout(self, small_corpus, tmp_path):
        solutions, descriptor, seeds = small_corpus
        report = scan_report(solutions, SMOOTH, descriptor, seeds)
        assert list(report) == ["params", "gamma_scan", "corpus_descriptor", "seeds"]
        assert report["params"]["lam"] == SMOOTH.lam
        assert [row["gamma"] for row in report["gamma_scan"]] == list(GAMMA_LADDER)
        out = tmp_path / "energy.json"
        text = write_scan_report(out, report)
        assert out.read_text() == text
        assert text.endswith("\n")

    def test_constant_stable_under_doubling(self):
        grid = GridSpec(dim=1, points=128)
        base, _, _ = build_corpus(heat_family(1), grid, count=6,
                                  final_time=1.0, seed=3, steps=64)
        doubled, _, _ = build_corpus(heat_family(1), grid, count=12,
                                     final_time=1.0, seed=3, steps=128)
        m_base = verify_estimate(base, SMOOTH).empirical_M
        m_doubled = verify_estimate(doubled, SMOOTH).empirical_M
        assert m_base > 0.0 and m_doubled > 0.0
        assert 0.5 <= m_doubled / m_base <= 2.0

    def test_empty_corpus_request_rejected(self):
        grid = GridSpec(dim=1, points=128)
        with pytest.raises(DomainError):
            build_corpus(heat_family(1), grid, count=0, final_time=1.0, seed=1)


class TestAdmissibilityFloor:
    """At the steepness floor the weight mass concentrates entirely in
    the bracket's data term: the constant is exactly 0.0, for every
    scan rate, for both corpus families."""

    def test_floor_values(self):
        th1 = stability_thresholds(1.0, 1.0, 1.0, 0.25)
        assert th1.weight_order_floor == pytest.approx(FLOOR_K1, rel=1e-13)
        th23 = stability_thresholds(2.0 / 3.0, 1.0, 1.0, 0.25)
        assert th23.weight_order_floor == pytest.approx(FLOOR_K23, rel=1e-13)

    @pytest.mark.parametrize(
        "family,floor",
        [(heat_family(1), FLOOR_K1), (borderline_family(0.5), FLOOR_K23)],
        ids=["heat", "borderline"],
    )
    def test_constant_zero_at_floor(self, family, floor):
        grid = GridSpec(dim=1, points=128)
        solutions, _, _ = build_corpus(family, grid, count=3, final_time=1.0,
                                       seed=5, steps=32)
        p = WeightParams.from_final_time(1.0, lam=floor, gamma=1.0)
        for gamma, report in gamma_scan(solutions, p):
            assert report.empirical_M == 0.0
            assert all(math.isfinite(r.ratio) for r in report.records)
