"""Exception hierarchy shared across the package."""

from __future__ import annotations


class ErsecovError(ValueError):
    """Base class for all errors raised by ersecov."""


class IngestError(ErsecovError):
    """A returns file could not be read or failed validation."""


class PanelMismatchError(ErsecovError):
    """Panels cannot be combined because their date sequences differ."""


class MomentError(ErsecovError):
    """Sample moments are undefined for the given window."""


class SpectralError(ErsecovError):
    """Eigendecomposition failed or its input was not a valid correlation matrix."""


class RotationError(ErsecovError):
    """A paired rotation was requested outside its feasible region."""


class ErseInfeasibleError(ErsecovError):
    """The rotation loop met a pair it cannot rotate.

    The steps completed before the failure are kept on ``trace``.
    """

    def __init__(self, message: str, trace=()):
        super().__init__(message)
        self.trace = list(trace)


class SingularCovarianceError(ErsecovError):
    """A covariance estimate is singular or not positive definite."""
