"""Exception types shared across the toolkit."""


class UnmixError(Exception):
    """Base class for all toolkit-specific errors."""


class ConfigError(UnmixError):
    """Invalid parameter combination (bad endmember count, undersized library, ...)."""


class DataFormatError(UnmixError):
    """Malformed or internally inconsistent on-disk data."""


class SolverDivergenceError(UnmixError):
    """A factor matrix left the finite range during iteration."""

    def __init__(self, message: str, iteration: int | None = None):
        super().__init__(message)
        self.iteration = iteration
