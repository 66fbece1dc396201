"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class RangeError(OverflowError):
    """A linear-scale value exceeds double range; use the log-scale variant."""


class QuadratureError(ArithmeticError):
    """Adaptive quadrature missed its tolerance; carries the achieved estimate."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class BracketError(RuntimeError):
    """Root bracketing exceeded its configured expansion cap."""


class SolverError(RuntimeError):
    """An iterative linear solve stagnated; carries the final residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class AmplificationError(RuntimeError):
    """Backward propagation would overflow at a retained frequency.

    Attributes name the offending frequency magnitude and the largest
    truncation radius that would have been safe.
    """

    def __init__(self, message, offending_xi=None, required_radius=None):
        super().__init__(message)
        self.offending_xi = offending_xi
        self.required_radius = required_radius


class PositivityError(RuntimeError):
    """No paraproduct order up to the cap restored positivity.

    Carries the best (least negative) normalized margin seen and the
    order cap that was exhausted.
    """

    def __init__(self, message, worst_margin=None, m_max=None):
        super().__init__(message)
        self.worst_margin = worst_margin
        self.m_max = m_max


class InvariantViolation(RuntimeError):
    """A verified mathematical invariant failed on concrete data."""


class ConfigError(ValueError):
    """The experiment configuration is malformed or inconsistent."""


class EmptyInputError(ValueError):
    """A command received an empty corpus or sweep; nothing to verify."""


class DegenerateFitError(RuntimeError):
    """Too few usable points to fit the logarithmic rate model.

    When raised after a sweep, ``rows`` carries the completed table so
    callers can still report the per-case results.
    """

    def __init__(self, message, rows=()):
        super().__init__(message)
        self.rows = tuple(rows)
