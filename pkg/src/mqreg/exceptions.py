"""Exception hierarchy.

Three broad classes so callers (and the CLI exit-code mapping) can
distinguish bad input, bad data files, and numerical failures.
"""


class MqregError(Exception):
    """Base class for all mqreg errors."""


class ValidationError(MqregError, ValueError):
    """Invalid argument or configuration, detected before any numerics."""


class SchemaError(MqregError, ValueError):
    """Malformed input file (missing column, bad timestamp, wrong shape)."""


class EstimationError(MqregError, RuntimeError):
    """Numerical failure during estimation."""


class InvalidLevelError(ValidationError):
    """Quantile level outside the open unit interval."""


class InfeasibleLevelError(ValidationError):
    """Stage level incompatible with the target joint level."""


class ProductMismatchError(ValidationError):
    """Stage levels do not multiply to the target level."""


class EmptyGridError(ValidationError):
    """No feasible grid point between the target level and one."""


class UnsupportedDimensionError(ValidationError):
    """Grid enumeration requested for more than two outcomes."""


class DimensionMismatchError(ValidationError):
    """Vector or matrix shapes do not conform."""


class EmptyGraphError(ValidationError):
    """A graph with no points where at least one is required."""


class NonpositiveBandwidthError(ValidationError):
    """Smoothing bandwidth must be strictly positive."""


class NonpositiveValueError(ValidationError):
    """Log transform applied to a value that is not strictly positive."""


class TooShortError(ValidationError):
    """Series too short for the requested lag design."""


class TooLargeError(ValidationError):
    """Instance exceeds the enumeration oracle's size limits."""


class RankDeficientError(EstimationError):
    """Design matrix numerically rank deficient."""


class DegenerateError(EstimationError):
    """No full-rank observation subset exists."""


class MaxIterationsError(EstimationError):
    """Solver failed to reach the duality-gap tolerance."""


class SubsampleTooSmallError(EstimationError):
    """Conditioned subsample has too few rows to fit."""


class BracketFailureError(EstimationError):
    """Root bracketing failed after expansion retries."""


class StageFailureError(EstimationError):
    """A sequential stage fit failed; wraps the underlying error."""

    def __init__(self, stage: int, cause: Exception):
        self.stage = stage
        super().__init__(f"stage {stage} fit failed: {cause}")
