"""Exception types shared across the package."""


class InvalidArgumentError(ValueError):
    """An argument violates an operation's preconditions."""


class AlignmentUndefinedError(ValueError):
    """Eye keypoints coincide, so no alignment angle exists."""


class UndefinedDistanceError(ValueError):
    """A distance was requested for a zero-norm vector."""


class DegenerateSampleError(ValueError):
    """A statistical test received a sample it cannot be computed on."""


class NumericError(ArithmeticError):
    """A loss or statistic became non-finite."""


class AdapterProtocolError(RuntimeError):
    """An out-of-process adapter sent a malformed or unexpected response."""


class CheckpointVersionError(RuntimeError):
    """A checkpoint container has an unknown magic or format version."""
