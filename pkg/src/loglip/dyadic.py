"""Dyadic (Littlewood-Paley) analysis: smooth cutoff, band operators,
and the norm characterizations built from them.

The band decomposition uses a smooth radial cutoff ``chi`` equal to 1
for |s| <= 11/10 and 0 for |s| >= 19/10; ``S_k`` filters to
``chi(|xi|/2**k)`` and the blocks are the differences
``D_0 = S_0``, ``D_k = S_k - S_{k-1}``.  On the torus these are exact
spectral multipliers, so block supports and the telescoping partition
of unity hold to rounding error, and the classical norm comparisons
(gradient sandwich per block, block-sum Sobolev norm, scaled block
bounds for Lipschitz functions) can be measured rather than assumed.
"""

import math
from collections import namedtuple
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .grids import Field, gradient, l2_norm, sobolev_norm, sup_norm


def _half_bump(t):
    out = np.zeros_like(t)
    pos = t > 0.0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


@dataclass(frozen=True)
class DyadicCutoff:
    """Smooth even cutoff profile: 1 inside ``plateau``, 0 outside ``support``.

    Built from the standard C-infinity step exp(-1/x)-quotient; any
    smooth profile with these plateau radii would do, and every
    derived constant is measured against the one actually used.
    """

    plateau: float = 1.1
    support: float = 1.9

    def __post_init__(self):
        if not 0.0 < self.plateau < self.support:
            raise DomainError(
                f"need 0 < plateau < support, got {self.plateau!r}, {self.support!r}"
            )

    def __call__(self, s):
        s = np.abs(np.asarray(s, dtype=np.float64))
        t = np.clip((self.support - s) / (self.support - self.plateau), 0.0, 1.0)
        num = _half_bump(t)
        return num / (num + _half_bump(1.0 - t))


_DEFAULT_CUTOFF = DyadicCutoff()


def full_band_shell(grid, cutoff=_DEFAULT_CUTOFF):
    """Smallest k with S_k = identity on this grid (plateau covers Nyquist)."""
    return max(0, math.ceil(math.log2(grid.max_frequency / cutoff.plateau)))


def smoothing_multiplier(grid, k, cutoff=_DEFAULT_CUTOFF):
    """The S_k symbol chi(|xi|/2**k) on the grid; k = -1 gives zero."""
    if k < -1:
        raise DomainError(f"smoothing index must be >= -1, got {k!r}")
    if k == -1:
        return np.zeros(grid.shape)
    return cutoff(grid.abs_frequencies / 2.0**k)


def block_multiplier(grid, k, cutoff=_DEFAULT_CUTOFF):
    """The block symbol: S_0 for k=0, S_k - S_{k-1} for k >= 1."""
    if k < 0:
        raise DomainError(f"block index must be >= 0, got {k!r}")
    if k == 0:
        return smoothing_multiplier(grid, 0, cutoff)
    return smoothing_multiplier(grid, k, cutoff) - smoothing_multiplier(
        grid, k - 1, cutoff
    )


def apply_smoothing(k, f, cutoff=_DEFAULT_CUTOFF):
    """S_k f.  Beyond the full-band shell the symbol is identically 1,
    so the field passes through unchanged (exact, not approximate)."""
    if k < -1:
        raise DomainError(f"smoothing index must be >= -1, got {k!r}")
    if k == -1:
        return Field.zero(f.grid)
    if k >= full_band_shell(f.grid, cutoff):
        return f
    return f.with_spectral(smoothing_multiplier(f.grid, k, cutoff) * f.spectral)


def apply_block(k, f, cutoff=_DEFAULT_CUTOFF):
    """Block D_k f; raises for k past the last block this grid can hold."""
    top = full_band_shell(f.grid, cutoff)
    if not 0 <= k <= top:
        raise DomainError(
            f"block index {k} outside the representable shells [0, {top}]"
        )
    return f.with_spectral(block_multiplier(f.grid, k, cutoff) * f.spectral)


def block_decomposition(f, cutoff=_DEFAULT_CUTOFF):
    """All blocks D_0..D_top; their sum reproduces f exactly."""
    return [apply_block(k, f, cutoff) for k in range(full_band_shell(f.grid, cutoff) + 1)]


BernsteinTriple = namedtuple(
    "BernsteinTriple", ["lower", "gradient", "upper", "degenerate"]
)


def check_bernstein(f_nu, nu):
    """Gradient sandwich data for a single block: (2**(nu-1)||f||, ||grad f||, 2**(nu+1)||f||).

    For nu >= 1 the sandwich must hold; at nu = 0 only the upper half
    does.  A zero block is flagged degenerate instead of failing.
    """
    if nu < 0:
        raise DomainError(f"block index must be >= 0, got {nu!r}")
    base = l2_norm(f_nu)
    if base == 0.0:
        return BernsteinTriple(0.0, 0.0, 0.0, True)
    grad = math.sqrt(sum(l2_norm(p) ** 2 for p in gradient(f_nu)))
    return BernsteinTriple(
        2.0 ** (nu - 1) * base, grad, 2.0 ** (nu + 1) * base, False
    )


def lp_sobolev_norm(f, theta, cutoff=_DEFAULT_CUTOFF):
    """Block-sum Sobolev norm (sum_k 2**(2k theta) ||D_k f||^2)**(1/2)."""
    total = 0.0
    for k in range(full_band_shell(f.grid, cutoff) + 1):
        total += 4.0 ** (k * theta) * l2_norm(apply_block(k, f, cutoff)) ** 2
    return math.sqrt(total)


def equivalence_ratio(f, theta, cutoff=_DEFAULT_CUTOFF):
    """lp_sobolev_norm / multiplier Sobolev norm; the two are uniformly
    comparable and the ratio is the measured equivalence constant."""
    reference = sobolev_norm(f, theta)
    if reference == 0.0:
        raise DomainError("equivalence ratio undefined for the zero field")
    return lp_sobolev_norm(f, theta, cutoff) / reference


LipBlockData = namedtuple("LipBlockData", ["scaled_block_sup", "smoothed_gradient_sup"])


def lip_block_check(a, cutoff=_DEFAULT_CUTOFF):
    """Scaled block bounds for Lipschitz functions.

    Returns (sup_k 2**k ||D_k a||_inf, sup_k ||grad S_k a||_inf); both
    are finite multiples of the grid Lipschitz norm sup|a| + sup|grad a|.
    """
    top = full_band_shell(a.grid, cutoff)
    block_sup = 0.0
    grad_sup = 0.0
    for k in range(top + 1):
        block_sup = max(block_sup, 2.0**k * sup_norm(apply_block(k, a, cutoff)))
        sk = apply_smoothing(k, a, cutoff)
        mag = np.sqrt(sum(np.abs(p.physical) ** 2 for p in gradient(sk)))
        grad_sup = max(grad_sup, float(np.max(mag)))
    return LipBlockData(block_sup, grad_sup)
