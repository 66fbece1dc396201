"""Frequency-truncated product operators and their estimate sweeps.

The order-``m`` truncated product of a coefficient ``a`` and a field
``u`` keeps the low-frequency part of ``a`` against each band of ``u``:

    T(a, m) u = S_{m-1} a * S_{m+2} u  +  sum_{k=m+3..top} S_{k-3} a * D_k u,

with the smoothing operators ``S_k`` and bands ``D_k`` of the dyadic
module.  On a grid the band sum stops at the full-band shell, where the
partition is exact; as ``m`` grows past the top shell the operator
degenerates to the plain pointwise product.

Each summand composes Fourier multipliers (self-adjoint, real even
symbols) with multiplication by a smoothed copy of ``a`` (self-adjoint
for real ``a`` up to conjugation), so the adjoint is computed exactly by
reversing each composition — no matrix is ever materialized.

The remaining functions measure the operator's mapping, positivity,
adjoint-defect, commutator, and remainder constants over randomized
sweeps and write them to a small CSV ledger.
"""

import math
from collections import namedtuple

import numpy as np

from .dyadic import _DEFAULT_CUTOFF, apply_block, apply_smoothing, full_band_shell
from .errors import DomainError, PositivityError
from .grids import (
    Field,
    atomic_write,
    band_limited_random,
    gradient,
    inner_product,
    l2_norm,
    lip_norm,
    sobolev_norm,
    subtract,
    sup_norm,
)


def _require_real(a):
    if not a.is_real(tol=1e-10):
        raise DomainError("coefficient field must be real")


def paraproduct_summand(a, k, u, cutoff=_DEFAULT_CUTOFF):
    """The single band term S_{k-3} a * D_k u (a Field)."""
    sa = apply_smoothing(k - 3, a, cutoff)
    du = apply_block(k, u, cutoff)
    return Field.from_physical(u.grid, sa.physical * du.physical)


def apply_paraproduct(a, m, u, cutoff=_DEFAULT_CUTOFF):
    """T(a, m) u.  Exact telescoping gives c*u for constant a."""
    if a.grid != u.grid:
        raise DomainError("coefficient and field live on different grids")
    if m < 0:
        raise DomainError(f"order must be >= 0, got {m!r}")
    top = full_band_shell(u.grid, cutoff)
    acc = (
        apply_smoothing(m - 1, a, cutoff).physical
        * apply_smoothing(m + 2, u, cutoff).physical
    )
    for k in range(m + 3, top + 1):
        acc = acc + (
            apply_smoothing(k - 3, a, cutoff).physical
            * apply_block(k, u, cutoff).physical
        )
    return Field.from_physical(u.grid, acc)


def adjoint_apply(a, m, v, cutoff=_DEFAULT_CUTOFF):
    """The exact adjoint T(a, m)* v: each composition reversed.

    Multiplier pieces are self-adjoint; the product picks up a conjugate
    (a no-op for the real coefficients the estimates assume).
    """
    if a.grid != v.grid:
        raise DomainError("coefficient and field live on different grids")
    if m < 0:
        raise DomainError(f"order must be >= 0, got {m!r}")
    top = full_band_shell(v.grid, cutoff)
    low = Field.from_physical(
        v.grid, np.conj(apply_smoothing(m - 1, a, cutoff).physical) * v.physical
    )
    acc = apply_smoothing(m + 2, low, cutoff)
    for k in range(m + 3, top + 1):
        band = Field.from_physical(
            v.grid, np.conj(apply_smoothing(k - 3, a, cutoff).physical) * v.physical
        )
        acc = acc.with_spectral(acc.spectral + apply_block(k, band, cutoff).spectral)
    return acc


# ---------------------------------------------------------------------------
# positivity


ParaproductOrder = namedtuple(
    "ParaproductOrder", ["m", "provenance", "margin", "test_count"]
)


def positivity_margin(a, kappa, test_fields, m, cutoff=_DEFAULT_CUTOFF):
    """Worst normalized margin Re<T u, u>/|u|^2 - kappa/2 over the fields."""
    worst = math.inf
    for u in test_fields:
        norm2 = l2_norm(u) ** 2
        if norm2 == 0.0:
            raise DomainError("positivity test fields must be nonzero")
        pairing = inner_product(apply_paraproduct(a, m, u, cutoff), u).real
        worst = min(worst, pairing / norm2 - 0.5 * kappa)
    return worst


def min_positivity_order(a, kappa, test_fields, m_max, cutoff=_DEFAULT_CUTOFF):
    """Smallest order whose worst margin over the test set is >= 0.

    Requires the coefficient to be real with a >= kappa > 0 pointwise.
    Raises PositivityError (carrying the best margin seen) if no order
    up to ``m_max`` works.
    """
    _require_real(a)
    if kappa <= 0.0:
        raise DomainError(f"kappa must be positive, got {kappa!r}")
    low = float(np.min(a.physical.real))
    if low < kappa * (1.0 - 1e-12):
        raise DomainError(
            f"coefficient minimum {low:.6g} lies below kappa = {kappa:.6g}"
        )
    test_fields = list(test_fields)
    if not test_fields:
        raise DomainError("positivity search needs at least one test field")
    best = -math.inf
    for m in range(m_max + 1):
        worst = positivity_margin(a, kappa, test_fields, m, cutoff)
        if worst >= 0.0:
            return ParaproductOrder(
                m=m, provenance="positivity-search", margin=worst,
                test_count=len(test_fields),
            )
        best = max(best, worst)
    raise PositivityError(
        f"no order m <= {m_max} restores positivity "
        f"(best margin {best:.6g})",
        worst_margin=best,
        m_max=m_max,
    )


def default_positivity_fields(grid, count, seed, cutoff=_DEFAULT_CUTOFF):
    """Deterministic adversarial fields plus a random fill.

    One field concentrated in each dyadic band (low bands are what break
    positivity at small orders), a near-Nyquist mode, and random
    wide-band draws up to ``count`` fields in total.
    """
    top = full_band_shell(grid, cutoff)
    hi_cap = top - 1  # highest shell with 2**k strictly inside Nyquist
    fields = []
    for k in range(0, hi_cap + 1):
        if len(fields) >= count:
            return fields
        fields.append(band_limited_random(grid, k, k, seed=seed + 1000 + k))
    if len(fields) < count:
        x = grid.positions() if grid.dim == 1 else grid.positions()[0]
        mode = math.floor(grid.max_frequency / 2.0)
        fields.append(Field.from_physical(grid, np.cos(mode * np.asarray(x))))
    i = 0
    while len(fields) < count:
        lo = (i * 37) % max(1, hi_cap)
        fields.append(band_limited_random(grid, lo, hi_cap, seed=seed + 2000 + i))
        i += 1
    return fields


# ---------------------------------------------------------------------------
# estimate ratios


def mapping_ratio(a, m, u, theta, cutoff=_DEFAULT_CUTOFF):
    """|T u|_{H^theta} / (|a|_inf |u|_{H^theta})."""
    denom = sup_norm(a) * sobolev_norm(u, theta)
    if denom == 0.0:
        raise DomainError("mapping ratio undefined for zero input")
    return sobolev_norm(apply_paraproduct(a, m, u, cutoff), theta) / denom


def adjoint_defect_norm(a, m, u, cutoff=_DEFAULT_CUTOFF):
    """max_j |(T - T*) d_j u|_{L^2} over coordinate directions."""
    worst = 0.0
    for du in gradient(u):
        defect = subtract(
            apply_paraproduct(a, m, du, cutoff), adjoint_apply(a, m, du, cutoff)
        )
        worst = max(worst, l2_norm(defect))
    return worst


def adjoint_defect_ratio(a, m, u, cutoff=_DEFAULT_CUTOFF):
    denom = lip_norm(a) * l2_norm(u)
    if denom == 0.0:
        raise DomainError("adjoint defect ratio undefined for zero input")
    return adjoint_defect_norm(a, m, u, cutoff) / denom


def commutator_block_norms(a, m, u, theta, cutoff=_DEFAULT_CUTOFF):
    """(sum_k 2^{-2 k theta} |d([D_k, T] du)|_{L^2}^2)^{1/2}.

    Both derivatives run over coordinate directions; the worst direction
    pair is returned so a single number certifies uniformity.
    """
    if not 0.0 <= theta <= 1.0:
        raise DomainError(f"theta must lie in [0, 1], got {theta!r}")
    top = full_band_shell(u.grid, cutoff)
    worst = 0.0
    for du in gradient(u):
        t_du = apply_paraproduct(a, m, du, cutoff)
        total = 0.0
        for k in range(top + 1):
            inner = subtract(
                apply_block(k, t_du, cutoff),
                apply_paraproduct(a, m, apply_block(k, du, cutoff), cutoff),
            )
            for d_inner in gradient(inner):
                total += 4.0 ** (-k * theta) * l2_norm(d_inner) ** 2
        worst = max(worst, math.sqrt(total))
    return worst


def commutator_ratio(a, m, u, theta, cutoff=_DEFAULT_CUTOFF):
    denom = lip_norm(a) * sobolev_norm(u, 1.0 - theta)
    if denom == 0.0:
        raise DomainError("commutator ratio undefined for zero input")
    return commutator_block_norms(a, m, u, theta, cutoff) / denom


def _pointwise_product(a, u):
    return Field.from_physical(u.grid, a.physical * u.physical)


def remainder_smoothing_check(a, m, u, cutoff=_DEFAULT_CUTOFF):
    """(h1_ratio, l2_ratio) for the remainder a*u - T(a, m) u.

    h1_ratio divides |a u - T u|_{H^1} by |a|_Lip |u|_{L^2}; l2_ratio
    does the same for the derivative remainder |(a - T) du|_{L^2}.
    """
    denom = lip_norm(a) * l2_norm(u)
    if denom == 0.0:
        raise DomainError("remainder ratios undefined for zero input")
    rem = subtract(_pointwise_product(a, u), apply_paraproduct(a, m, u, cutoff))
    h1_ratio = sobolev_norm(rem, 1.0) / denom
    l2_ratio = 0.0
    for du in gradient(u):
        drem = subtract(_pointwise_product(a, du), apply_paraproduct(a, m, du, cutoff))
        l2_ratio = max(l2_ratio, l2_norm(drem) / denom)
    return h1_ratio, l2_ratio


def remainder_sobolev_ratio(a, m, u, theta, cutoff=_DEFAULT_CUTOFF):
    """|a u - T u|_{H^theta} / (|a|_Lip |u|_{L^2}) for the interpolation check."""
    denom = lip_norm(a) * l2_norm(u)
    if denom == 0.0:
        raise DomainError("remainder ratio undefined for zero input")
    rem = subtract(_pointwise_product(a, u), apply_paraproduct(a, m, u, cutoff))
    return sobolev_norm(rem, theta) / denom


# ---------------------------------------------------------------------------
# sweeps and the constants ledger


LedgerRow = namedtuple(
    "LedgerRow", ["estimate_id", "theta", "m", "measured_constant", "sweep_size", "seed"]
)


def sweep_fields(grid, count, seed, cutoff=_DEFAULT_CUTOFF):
    """Deterministic list of random band-limited fields for estimate sweeps."""
    top = full_band_shell(grid, cutoff)
    hi_cap = top - 1
    fields = []
    for i in range(count):
        hi = 2 + (i % max(1, hi_cap - 1))
        lo = (i * 7) % (hi + 1)
        fields.append(band_limited_random(grid, lo, hi, seed=seed + 3000 + i))
    return fields


def constants_sweep(a, m, count, seed, thetas=(0.0, 0.5, 1.0),
                    cutoff=_DEFAULT_CUTOFF):
    """Measure every estimate constant over one randomized sweep.

    Returns ledger rows (one per estimate and theta) whose
    measured_constant is the worst ratio seen across the sweep.
    """
    fields = sweep_fields(a.grid, count, seed, cutoff)
    rows = []

    for theta in (0.0, 1.0):
        c = max(mapping_ratio(a, m, u, theta, cutoff) for u in fields)
        rows.append(LedgerRow("mapping", theta, m, c, count, seed))

    c = max(adjoint_defect_ratio(a, m, u, cutoff) for u in fields)
    rows.append(LedgerRow("adjoint_defect", float("nan"), m, c, count, seed))

    for theta in thetas:
        c = max(commutator_ratio(a, m, u, theta, cutoff) for u in fields)
        rows.append(LedgerRow("commutator", theta, m, c, count, seed))

    c0 = c1 = chalf = 0.0
    for u in fields:
        h1, l2 = remainder_smoothing_check(a, m, u, cutoff)
        c0, c1 = max(c0, l2), max(c1, h1)
        chalf = max(chalf, remainder_sobolev_ratio(a, m, u, 0.5, cutoff))
    rows.append(LedgerRow("remainder_l2", 0.0, m, c0, count, seed))
    rows.append(LedgerRow("remainder_h1", 1.0, m, c1, count, seed))
    rows.append(LedgerRow("remainder_h_half", 0.5, m, chalf, count, seed))
    return rows


def write_constants_ledger(path, rows):
    """CSV ledger of measured estimate constants."""
    with atomic_write(path) as handle:
        handle.write("estimate_id,theta,m,measured_constant,sweep_size,seed\n")
        for row in rows:
            theta = "" if math.isnan(row.theta) else f"{row.theta:.17g}"
            handle.write(
                f"{row.estimate_id},{theta},{row.m},"
                f"{row.measured_constant:.17g},{row.sweep_size},{row.seed}\n"
            )
