"""Exception types shared across the package."""


class DataError(ValueError):
    """Raised when input data is missing, malformed or degenerate."""


class InvariantError(AssertionError):
    """Raised when internal bookkeeping (e.g. sampler counts) is inconsistent."""
