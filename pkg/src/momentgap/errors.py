"""Exception types shared across the package."""


class MomentGapError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(MomentGapError, ValueError):
    """A numeric argument is outside its admissible range."""


class InvalidDistributionError(MomentGapError, ValueError):
    """Atoms/probabilities do not form a valid finite distribution.

    ``field`` names the offending location (e.g. ``atoms[3].p``) when known.
    """

    def __init__(self, message, field=None):
        self.field = field
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)


class PreconditionError(MomentGapError, ValueError):
    """Input fails an operation's precondition (not centered, not symmetric...)."""

    def __init__(self, message, measured=None):
        self.measured = measured
        super().__init__(message)


class UnsupportedRegimeError(MomentGapError, ValueError):
    """No sharp-constant regime covers the requested (rho, class)."""


class QuadratureError(MomentGapError, RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message, estimate=None, achieved=None):
        self.estimate = estimate
        self.achieved = achieved
        super().__init__(message)


class SharpnessNotAttained(MomentGapError, RuntimeError):
    """The ratio optimizer could not close the gap to a sharp constant."""

    def __init__(self, message, result=None):
        self.result = result
        super().__init__(message)
