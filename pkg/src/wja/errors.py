"""Exception hierarchy. Each family maps onto one CLI exit status."""


class WJAError(Exception):
    exit_code = 5


class ValidationError(WJAError, ValueError):
    """Input outside its physical domain."""

    exit_code = 2


class FluxDomainError(ValidationError):
    """Reduced flux at or beyond the |phi| < 0.5 branch."""


class EvanescentModeError(ValidationError):
    """Frequency at or below the TE10 cutoff."""


class ThresholdError(ValidationError):
    """Parametric drive at or beyond the oscillation threshold."""


class BandwidthUndefinedError(ValidationError):
    pass


class ParseError(WJAError, ValueError):
    exit_code = 3


class NonConvergenceError(WJAError, RuntimeError):
    exit_code = 4


class AnalyticModelWarning(UserWarning):
    """Analytic model evaluated outside its stated validity range."""


class DegeneracyWarning(UserWarning):
    """Fit covariance is (near-)singular; some parameters are not identified."""


class FitQualityWarning(UserWarning):
    pass
