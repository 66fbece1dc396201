"""loglip: spectral toolkit for backward-parabolic evolution with
log-Lipschitz coefficients.

Subpackages cover the singular-weight calculus, periodic spectral
fields, dyadic (Littlewood-Paley) analysis, paradifferential operators,
coefficient families with mollification diagnostics, exact and stepped
propagators, the weighted energy-estimate harness, and the
Fourier-truncation reconstruction experiments, plus a CLI driving all
of it.
"""

from .weights import COMPILED_KERNELS, kernel_backend

__version__ = "0.1.0"

__all__ = ["COMPILED_KERNELS", "kernel_backend", "__version__"]
