"""Exception hierarchy shared by all fcsl modules."""


class FcslError(Exception):
    """Base class for every error raised by the package."""


class ConfigurationError(FcslError, ValueError):
    """Invalid grid, solver, model or run configuration."""


class ShapeError(FcslError, ValueError):
    """Array length does not match the grid."""


class DomainError(FcslError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class AccuracyError(FcslError, ArithmeticError):
    """A quadrature failed its self-refinement test."""


class StabilityError(FcslError, ArithmeticError):
    """The explicit time step violates the monotonicity (CFL) bound."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class DivergenceError(FcslError, ArithmeticError):
    """A path produced NaN or a value beyond the divergence cap."""

    def __init__(self, message, step=None, partial=None):
        super().__init__(message)
        self.step = step
        self.partial = partial


class InsufficientDataError(FcslError, ValueError):
    """Not enough samples or records to compute the requested quantity."""


class ComparisonError(FcslError, ValueError):
    """Two objects describe different quantities and cannot be compared."""


class NotApplicableError(FcslError, ValueError):
    """The check does not apply to this model."""


class PreconditionError(FcslError, ValueError):
    """Inputs violate a documented precondition."""


class DegenerateRatioError(FcslError, ZeroDivisionError):
    """A ratio statistic has a zero denominator."""


class CorruptionError(FcslError, IOError):
    """Snapshot bytes fail the integrity check."""


class VersionError(FcslError, IOError):
    """Snapshot written by an unknown format version."""
