"""Exception types shared across the package."""


class SigtrialError(Exception):
    """Base class for all package errors."""


class NotPositiveDefinite(SigtrialError):
    """Matrix passed to a factorization is not positive definite."""


class DimensionMismatch(SigtrialError):
    """Array dimensions do not agree."""


class InvalidInput(SigtrialError):
    """Argument outside its documented domain."""


class SingularInformation(SigtrialError):
    """Information matrix is singular; the fit cannot proceed."""


class TooFewPoints(SigtrialError):
    """Fewer points than clusters requested."""


class InvalidFoldCount(SigtrialError):
    """Fold count incompatible with the sample size."""


class LengthMismatch(SigtrialError):
    """Paired arrays have different lengths."""


class ConfigInvalid(SigtrialError):
    """Scenario or run configuration violates its invariants."""
