"""Verification harness for the weighted energy inequality.

For a sampled backward trajectory ``u`` and weight parameters ``p`` the
two sides of the estimate are, with ``w(t) = exp(2*gamma*t -
2*beta*Phi((t+tau)/beta))`` and ``Phi'`` the weight slope,

    lhs(s) = int_0^s w(t) |u(t)|_{H^{1-alpha t}}^2 dt

    rhs(s) = (s+tau) w(s) |u(s)|_{H^{1-alpha s}}^2
             + tau * Phi'(tau/beta) * exp(-2*beta*Phi(tau/beta)) * |u(0)|_{L2}^2

and the harness reports the empirical constant

    M = max over (trajectory, s) of lhs(s) / (gamma * rhs(s)).

The weights overflow double range long before the mathematics gets
interesting, so every weight is carried as a two-level log pair
``(base, wlog)`` meaning ``log w = base + exp(wlog)`` (see
``weights.log_weight_split``), and only ratios of weights against a
shared dominant reference are materialized.  Pair differences come from
:func:`log_weight_delta`: exact while the inner exponentials fit in
doubles, saturating with the correct sign once they do not — two
distinct doubles above 690 differ by at least one spacing step (about
1e-13 there), so their inner exponentials differ by factors beyond
e^600 and the smaller pair's contribution is exactly zero at double
precision.

Steep weight profiles concentrate all representable weight in the data
term of the bracket: already somewhat above the admissibility floor for
the steepness, every other factor underflows to zero and the reported
constant is exactly 0.0 — the inequality holds with room to spare that
double precision cannot resolve.
"""

import math
from dataclasses import asdict, dataclass, replace

from .errors import (
    DomainError,
    EmptyInputError,
    InvariantViolation,
    RangeError,
)
from .evolution import admissible_backward_solution
from .grids import band_limited_random, l2_norm, sobolev_norm
from .serialize import dump_json
from .weights import log_weight_slope, log_weight_split

__all__ = [
    "log_weight_delta",
    "ScaledSides",
    "weighted_sides",
    "weighted_lhs",
    "weighted_rhs_bracket",
    "EnergyRecord",
    "EnergyReport",
    "verify_estimate",
    "gamma_scan",
    "GAMMA_LADDER",
    "build_corpus",
    "scan_report",
    "write_scan_report",
]

#: inner exponents at or below this always materialize as finite doubles
_INNER_SAFE = 690.0
#: log of the largest double
_LOG_DBL_MAX = 709.782712893384
#: rescaled factors must stay clear of overflow
_SCALED_CAP = 700.0
#: default scan rates for the empirical constant
GAMMA_LADDER = (1.0, 10.0, 100.0, 1000.0)


def log_weight_delta(pair, ref):
    """Difference of two two-level log weights, ``L(pair) - L(ref)``.

    Each argument is ``(base, wlog)`` with ``L = base + exp(wlog)``;
    ``wlog = -inf`` marks a vanished inner part.  The result is exact
    (to double rounding) whenever both inner exponentials are
    representable; beyond that range the larger ``wlog`` decides the
    sign and the magnitude saturates, which is the correct
    double-precision answer because distinct ``wlog`` values that large
    correspond to weights separated by factors beyond e^600.
    """
    base, w = pair
    ref_base, ref_w = ref
    shift = base - ref_base
    if w == ref_w:
        return shift
    hi = max(w, ref_w)
    if hi <= _INNER_SAFE:
        return shift + math.exp(w) - math.exp(ref_w)
    lo = min(w, ref_w)
    mag = hi + math.log1p(-math.exp(lo - hi))
    diff = math.inf if mag > _LOG_DBL_MAX else math.exp(mag)
    return shift + diff if w > ref_w else shift - diff


def _dominant(pairs):
    best = pairs[0]
    for cand in pairs[1:]:
        if log_weight_delta(cand, best) > 0.0:
            best = cand
    return best


def _scaled(pair, ref, log_shift):
    exponent = log_weight_delta(pair, ref) + log_shift
    if exponent > _SCALED_CAP:
        raise RangeError(
            f"weight factor overflows after rescaling (exponent {exponent:.6g})"
        )
    return math.exp(exponent)


def _materialize(scaled, base, wlog):
    """``scaled * exp(base + exp(wlog))`` as a double, or RangeError."""
    if scaled == 0.0:
        return 0.0
    if wlog > _LOG_DBL_MAX:
        raise RangeError(
            f"log-weight itself exceeds double range (log-log value {wlog:.6g})"
        )
    log_scale = base + math.exp(wlog)
    log_value = log_scale + math.log(scaled)
    if log_value > _LOG_DBL_MAX:
        raise RangeError(
            f"weighted value exceeds double range (log value {log_value:.6g})"
        )
    if log_scale <= _LOG_DBL_MAX:
        value = scaled * math.exp(log_scale)
        if math.isfinite(value):
            return value
    return math.exp(log_value)


class _RunTable:
    """Per-trajectory precomputation: weight pairs and squared norms."""

    def __init__(self, traj, p):
        if abs(traj.times[0]) > 1e-12:
            raise DomainError(
                "trajectory must start at t = 0 (the bracket uses u(0))"
            )
        horizon = p.sigma * (1.0 + 1e-12)
        # times are strictly increasing, so the verifiable part is a prefix
        count = sum(1 for t in traj.times if t <= horizon)
        if count == 0:
            raise DomainError("no trajectory samples inside the verification window")
        self.p = p
        self.times = [max(t, 0.0) for t in traj.times[:count]]
        self.pairs = [log_weight_split(p, t) for t in self.times]
        self.sq_norms = [
            sobolev_norm(traj.fields[j], 1.0 - p.alpha * self.times[j]) ** 2
            for j in range(count)
        ]
        self.data_sq = l2_norm(traj.fields[0]) ** 2
        # bracket data term: tau * slope(tau/beta) * exp(-2 beta Phi(tau/beta));
        # its inner part is the t=0 weight's, so the slope joins the base level
        slope_log = log_weight_slope(p.lam, p.tau / p.beta)
        self.data_pair = (math.log(p.tau) + slope_log, self.pairs[0][1])

    def locate(self, s):
        tol = 1e-12 * max(1.0, abs(s))
        for j, t in enumerate(self.times):
            if abs(t - s) <= tol:
                return j
        raise DomainError(
            f"s={s!r} is not a trajectory sample time inside [0, {self.p.sigma!r}]"
        )

    def sides(self, s_index, log_shift=0.0):
        s = self.times[s_index]
        ref = _dominant(self.pairs[: s_index + 1] + [self.data_pair])
        lhs = 0.0
        if s_index > 0:
            for j in range(s_index + 1):
                left = self.times[max(j - 1, 0)]
                right = self.times[min(j + 1, s_index)]
                coeff = 0.5 * (right - left) * self.sq_norms[j]
                lhs += coeff * _scaled(self.pairs[j], ref, log_shift)
        term1 = (
            (s + self.p.tau)
            * self.sq_norms[s_index]
            * _scaled(self.pairs[s_index], ref, log_shift)
        )
        term2 = self.data_sq * _scaled(self.data_pair, ref, log_shift)
        return lhs, term1 + term2, ref


@dataclass(frozen=True)
class ScaledSides:
    """Both sides of the estimate under one common rescaling.

    The true values are ``scaled * exp(scale_base + exp(scale_wlog) -
    log_shift)``; the ratio ``lhs/rhs`` needs no materialization.
    """

    lhs_scaled: float
    rhs_scaled: float
    scale_base: float
    scale_wlog: float
    log_shift: float


def weighted_sides(traj, p, s, log_shift=0.0):
    """Evaluate both sides at time ``s`` under a shared rescaling exponent.

    ``s`` must coincide with a trajectory sample time in ``[0, sigma]``;
    the left side is the trapezoid rule on the trajectory's own grid.
    ``log_shift`` offsets the common rescaling exponent; any choice that
    avoids overflow yields the same ratio up to rounding.
    """
    table = _RunTable(traj, p)
    lhs, rhs, ref = table.sides(table.locate(s), log_shift)
    return ScaledSides(
        lhs_scaled=lhs,
        rhs_scaled=rhs,
        scale_base=ref[0],
        scale_wlog=ref[1],
        log_shift=log_shift,
    )


def weighted_lhs(traj, p, s):
    """Materialized left side; RangeError when it exceeds double range."""
    sides = weighted_sides(traj, p, s)
    return _materialize(sides.lhs_scaled, sides.scale_base, sides.scale_wlog)


def weighted_rhs_bracket(traj, p, s):
    """Materialized right-side bracket; RangeError past double range."""
    sides = weighted_sides(traj, p, s)
    return _materialize(sides.rhs_scaled, sides.scale_base, sides.scale_wlog)


@dataclass(frozen=True)
class EnergyRecord:
    """One (trajectory, s) evaluation of the estimate.

    ``ratio`` is ``lhs / (gamma * rhs)``.  ``lhs``/``rhs`` hold the
    materialized sides when they fit in doubles, else None; the scaled
    values with ``(scale_base, scale_wlog)`` are always exact.
    """

    run: int
    s: float
    ratio: float
    lhs_scaled: float
    rhs_scaled: float
    scale_base: float
    scale_wlog: float
    lhs: float | None
    rhs: float | None


@dataclass(frozen=True)
class EnergyReport:
    """Corpus-wide verification result: every record plus the constant."""

    params: object
    records: tuple
    empirical_M: float


def _maybe_materialize(scaled, base, wlog):
    try:
        return _materialize(scaled, base, wlog)
    except RangeError:
        return None


def verify_estimate(solutions, p, s_grid=None):
    """Evaluate the estimate over a corpus and report the empirical constant.

    ``s_grid`` lists the evaluation times (each must be a sample time of
    every trajectory); None means every sample time inside ``[0, sigma]``.
    Zero solutions contribute vacuous 0/0 evaluations and are skipped; a
    positive left side against a vanishing bracket, or any non-finite
    ratio, is an invariant violation naming the offending run.
    """
    solutions = list(solutions)
    if not solutions:
        raise EmptyInputError("no solutions to verify")
    records = []
    for run, traj in enumerate(solutions):
        table = _RunTable(traj, p)
        if s_grid is None:
            indices = range(len(table.times))
        else:
            indices = [table.locate(s) for s in s_grid]
        for j in indices:
            lhs_scaled, rhs_scaled, ref = table.sides(j)
            if rhs_scaled == 0.0:
                if lhs_scaled == 0.0:
                    continue  # zero solution: nothing to test at this s
                raise InvariantViolation(
                    f"run {run}, s={table.times[j]!r}: positive left side "
                    "against a vanishing right-side bracket"
                )
            ratio = lhs_scaled / (p.gamma * rhs_scaled)
            if not math.isfinite(ratio):
                raise InvariantViolation(
                    f"run {run}, s={table.times[j]!r}: non-finite ratio {ratio!r}"
                )
            records.append(
                EnergyRecord(
                    run=run,
                    s=table.times[j],
                    ratio=ratio,
                    lhs_scaled=lhs_scaled,
                    rhs_scaled=rhs_scaled,
                    scale_base=ref[0],
                    scale_wlog=ref[1],
                    lhs=_maybe_materialize(lhs_scaled, ref[0], ref[1]),
                    rhs=_maybe_materialize(rhs_scaled, ref[0], ref[1]),
                )
            )
    empirical = max((rec.ratio for rec in records), default=0.0)
    return EnergyReport(params=p, records=tuple(records), empirical_M=empirical)


def gamma_scan(solutions, p, gammas=GAMMA_LADDER, s_grid=None):
    """Empirical constant per scan rate: ((gamma, report), ...)."""
    out = []
    for gamma in gammas:
        scanned = replace(p, gamma=float(gamma))
        out.append((float(gamma), verify_estimate(solutions, scanned, s_grid)))
    return tuple(out)


def build_corpus(family, grid, count, final_time, seed, steps=64,
                 shell_hi_cap=None):
    """Deterministic corpus of admissible backward runs from band-limited data.

    Run ``i`` draws unit-L2 data in the dyadic band ``[2**lo, 2**hi]``
    with ``hi`` cycling over the grid's usable shells (optionally capped)
    and seed ``seed + i``, then propagates it backward from
    ``final_time``.  Returns ``(solutions, descriptor, seeds)`` where the
    descriptor pins every generation choice.
    """
    if count <= 0:
        raise DomainError(f"corpus size must be positive, got {count!r}")
    hi_max = int(math.floor(math.log2(grid.max_frequency * (1.0 - 1e-12))))
    if shell_hi_cap is not None:
        hi_max = min(hi_max, int(shell_hi_cap))
    if hi_max < 1:
        raise DomainError("grid holds no usable dyadic shells for corpus data")
    solutions, shells, seeds = [], [], []
    for i in range(count):
        hi = 1 + (i % hi_max)
        lo = (3 * i) % (hi + 1)
        run_seed = seed + i
        final = band_limited_random(grid, lo, hi, run_seed)
        solutions.append(
            admissible_backward_solution(final, family, final_time, steps)
        )
        shells.append([lo, hi])
        seeds.append(run_seed)
    descriptor = {
        "family": family.label,
        "dim": grid.dim,
        "period": grid.period,
        "points": grid.points,
        "final_time": final_time,
        "steps": steps,
        "count": count,
        "shells": shells,
    }
    return solutions, descriptor, seeds


def scan_report(solutions, p, descriptor=None, seeds=(), gammas=GAMMA_LADDER,
                s_grid=None):
    """JSON-ready summary: params, per-gamma constants, corpus provenance."""
    scan = gamma_scan(solutions, p, gammas, s_grid)
    return {
        "params": {key: float(val) for key, val in asdict(p).items()},
        "gamma_scan": [
            {"gamma": gamma, "empirical_M": report.empirical_M}
            for gamma, report in scan
        ],
        "corpus_descriptor": descriptor,
        "seeds": list(seeds),
    }


def write_scan_report(path, report):
    """Atomically write a :func:`scan_report` dict as canonical JSON."""
    return dump_json(path, report)
