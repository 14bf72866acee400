"""Exception types shared across the package."""


class EchoMemError(Exception):
    """Base class for all package-specific failures."""


class SingularEvaluationError(EchoMemError):
    """Raised when a closed-form expression is evaluated at (or too near) a pole."""


class QuadratureError(EchoMemError):
    """Raised when adaptive quadrature fails to converge.

    The estimated residual is carried in ``residual`` when available.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class RootFindingError(EchoMemError):
    """Raised when polynomial root polishing does not converge, with residuals attached."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class DegenerateRootError(EchoMemError):
    """Raised when a residue formula is evaluated with (numerically) repeated roots."""


class NormalizationError(EchoMemError):
    """Raised when a quantity that must be real-positive picks up a large imaginary part."""


class ModeOverlapError(EchoMemError):
    """Raised when declared signal modes overlap in time."""


class IntegrationError(EchoMemError):
    """Raised when the time-domain integrator detects instability."""


class ThresholdError(EchoMemError):
    """Raised when a requested threshold crossing does not exist in the scanned range."""


class LevelNotAttainedError(EchoMemError):
    """Raised when a bandwidth level is never reached by the response curve."""


class ConfigError(EchoMemError):
    """Raised for malformed or unknown configuration input."""
