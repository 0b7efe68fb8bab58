"""Exception hierarchy shared by all modules."""


class NormsolError(Exception):
    """Base class for every error raised by the package."""


class ParameterError(NormsolError, ValueError):
    """Invalid or inconsistent parameter values."""


class RegimeError(NormsolError):
    """Operation requested in a regime where it is not defined."""


class ThresholdError(NormsolError):
    """A smallness hypothesis on the masses or coupling fails."""


class ShootingError(NormsolError):
    """Shooting bisection could not bracket the decaying solution."""


class ConstraintError(NormsolError):
    """State masses do not match the prescribed values."""


class DilationRangeError(NormsolError):
    """Dilation parameter too large for interpolation on the grid."""


class StructureViolation(NormsolError):
    """Fiber root pattern disagrees with the structure result for the regime.

    This is a mathematical anomaly rather than an operational failure, so
    the command line maps it to exit status 2.
    """


class BudgetError(NormsolError):
    """Iteration budget exhausted before convergence."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class BasinEscapeError(NormsolError):
    """Local descent left the admissible gradient ball."""


class SaddleSearchError(NormsolError):
    """Reduced descent stalled without gradient decay."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ExistenceThresholdError(NormsolError):
    """No positive root of the symmetric algebraic system was found."""


class ConfigError(NormsolError):
    """Problem with a run configuration file."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
