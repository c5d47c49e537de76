"""Exception types shared across the package.

The CLI maps these onto exit codes: validation problems (bad arguments,
malformed files, dimension/domain violations) exit with 2, numerical
failures (non-SPD matrices, singular scatters, degenerate data) with 3.
"""

from __future__ import annotations


class MatstatsError(Exception):
    """Base class for all package-specific errors."""


class DomainError(MatstatsError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class DimensionError(MatstatsError, ValueError):
    """Shapes of the supplied arrays are inconsistent."""


class UnsupportedModelError(MatstatsError, ValueError):
    """The requested operation is undefined for this model family."""


class ManifestError(MatstatsError, ValueError):
    """A dataset manifest or one of its referenced files is malformed."""


class NotPositiveDefiniteError(MatstatsError):
    """Cholesky factorization failed; ``pivot`` is the offending 1-based minor order."""

    def __init__(self, pivot: int, message: str | None = None):
        self.pivot = int(pivot)
        super().__init__(message or f"matrix is not positive definite (leading minor {self.pivot})")


class InsufficientDataError(MatstatsError, ValueError):
    """Fewer observations than the estimator requires."""


class DegenerateDataError(MatstatsError):
    """The dataset has zero variance; covariance factors are not estimable."""


class SingularScatterError(MatstatsError):
    """The weighted scatter matrix is singular (sample size does not exceed dimension)."""


VALIDATION_ERRORS = (
    DomainError,
    DimensionError,
    UnsupportedModelError,
    ManifestError,
    InsufficientDataError,
    ValueError,
)

NUMERICAL_ERRORS = (
    NotPositiveDefiniteError,
    DegenerateDataError,
    SingularScatterError,
    FloatingPointError,
)
