"""Exception types raised across the package."""


class PowerEmbedError(Exception):
    """Base class for all library errors."""


class InvalidEdge(PowerEmbedError, ValueError):
    pass


class ShapeError(PowerEmbedError, ValueError):
    pass


class TooLarge(PowerEmbedError, ValueError):
    pass


class NotSymmetric(PowerEmbedError, ValueError):
    pass


class EigFailed(PowerEmbedError, RuntimeError):
    pass


class RankDeficient(PowerEmbedError, ValueError):
    """A matrix lacks the column rank an operation needs.

    ``iteration`` is set when the failure happens inside an iterative
    embedding (0-based index of the step that collapsed).
    """

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class ZeroColumn(PowerEmbedError, ValueError):
    pass


class InvalidParams(PowerEmbedError, ValueError):
    pass


class NotPSD(PowerEmbedError, ValueError):
    pass


class InvalidLabel(PowerEmbedError, ValueError):
    pass


class EigGapWarning(UserWarning):
    """The k-th and (k+1)-th eigenvalue magnitudes are tied."""
