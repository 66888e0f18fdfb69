"""Exception types raised across the package.

Every error the library can raise derives from :class:`RpcasegError`, so
callers (and the CLI) can catch one base class. Where a builtin exception
fits, the specific class also inherits from it.
"""


class RpcasegError(Exception):
    """Base class for all errors raised by this package."""


class MissingFileError(RpcasegError, FileNotFoundError):
    """A referenced file does not exist."""


class ManifestParseError(RpcasegError, ValueError):
    """Sequence manifest is malformed (bad JSON, field, or duplicate path)."""


class EmptySequenceError(RpcasegError, ValueError):
    """Sequence manifest declares no frames."""


class DecodeError(RpcasegError, ValueError):
    """File exists but cannot be decoded as a raster image."""


class ZeroSizeError(RpcasegError, ValueError):
    """Requested working size has a zero dimension."""


class NonPositiveSigmaError(RpcasegError, ValueError):
    """Gaussian blur requires sigma > 0."""


class ImageTooSmallError(RpcasegError, ValueError):
    """Image is below the minimum size for the operation."""


class DimensionMismatchError(RpcasegError, ValueError):
    """Two arrays that must share dimensions do not."""


class TooFewFramesError(RpcasegError, ValueError):
    """Matrix assembly / decomposition needs at least two frames."""


class ZeroDimensionError(RpcasegError, ValueError):
    """Matrix dimensions must be >= 1."""


class NegativeTauError(RpcasegError, ValueError):
    """Shrinkage threshold must be non-negative."""


class SvdFailureError(RpcasegError, RuntimeError):
    """Singular value decomposition did not converge."""


class RankOutOfBoundsError(RpcasegError, ValueError):
    """Requested rank is outside [1, min(rows, cols)] (or exceeds it)."""


class ConvergenceFailureError(RpcasegError, RuntimeError):
    """Iterative routine failed to produce a usable result."""


class NonFiniteInputError(RpcasegError, ValueError):
    """Input matrix contains NaN or infinite entries."""


class ThresholdOutOfRangeError(RpcasegError, ValueError):
    """Hard threshold must lie strictly inside (0, 1)."""


class NoGroundTruthError(RpcasegError, ValueError):
    """No frame in the evaluated set has a ground-truth mask."""


class UnpairedSequenceError(RpcasegError, ValueError):
    """Mixed day/night grouping requires equal day and night counts."""


class FractionOutOfRangeError(RpcasegError, ValueError):
    """Sparsity fraction must lie in [0, 1]."""


class EmptyResultError(RpcasegError, ValueError):
    """Result set is empty; no best configuration exists."""
