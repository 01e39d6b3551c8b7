"""
Exceptions raised by the library and the exit codes the CLI maps them to
"""

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class SmoothRLError(Exception):
    """Base class for every error raised by this package"""
    exit_code = EXIT_NUMERICAL


class ConfigError(SmoothRLError, ValueError):
    """Experiment configuration is malformed or inconsistent"""
    exit_code = EXIT_CONFIG


class DomainError(SmoothRLError, ValueError):
    """Argument lies outside [-1, 1] (beyond tolerance)"""


class DegreeError(SmoothRLError, ValueError):
    """Requested polynomial degree exceeds the configured maximum"""


class IndexSetOverflowError(SmoothRLError, OverflowError):
    """Multi-index set would exceed the configured cardinality cap"""


class DimensionMismatchError(SmoothRLError, ValueError):
    """Point dimension does not match the feature map"""


class ShapeMismatchError(SmoothRLError, ValueError):
    """State or action shape does not match the environment"""


class EmptyGridError(SmoothRLError, ValueError):
    """Action candidate grid is empty"""


class NumericalError(SmoothRLError, ArithmeticError):
    """Linear algebra broke down (singular Gram matrix, non-finite weights)"""


class QuadratureError(SmoothRLError, ArithmeticError):
    """Transition density failed its normalization check"""


class DegenerateFitError(SmoothRLError, ArithmeticError):
    """Approximation error underflowed, so a log-log fit is meaningless"""

    def __init__(self, message: str, degrees=None, errors=None):
        super().__init__(message)
        self.degrees = list(degrees or [])
        self.errors = list(errors or [])


class InsufficientSeedsError(SmoothRLError, ValueError):
    """Confidence intervals need at least two seeds"""


class ResolutionError(SmoothRLError, ValueError):
    """Oracle grids exceed the memory cap or the environment is unsupported"""
