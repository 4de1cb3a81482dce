"""Exception hierarchy shared by every stage of the pipeline."""


class NonlocalPoissonError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(NonlocalPoissonError, ValueError):
    """Invalid sizes, mismatched scales or malformed configuration."""


class DomainError(NonlocalPoissonError, ValueError):
    """An argument lies outside the region where an operation is defined."""


class GeometryError(NonlocalPoissonError):
    """Degenerate chart or boundary metric."""


class MetricError(NonlocalPoissonError, ValueError):
    """An error metric or rate cannot be formed (zero denominator, bad input)."""


class SingularReductionError(NonlocalPoissonError):
    """The boundary coefficient has a nonpositive entry, so the flux cannot be eliminated."""


class NonConvergenceError(NonlocalPoissonError):
    """The iterative solver hit its iteration cap.

    Attributes
    ----------
    residual_history : list of float
        Relative residual after every iteration that was performed.
    """

    def __init__(self, message, residual_history):
        super().__init__(message)
        self.residual_history = list(residual_history)
