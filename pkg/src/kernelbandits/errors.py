"""Shared exception types."""


class ConfigError(ValueError):
    """Raised for invalid experiment configuration (CLI exit code 2)."""


class CapacityError(RuntimeError):
    """Raised when a requested allocation exceeds the configured memory cap."""


class DegeneracyError(RuntimeError):
    """Raised on numerical breakdown: non-positive Cholesky pivots,
    variances driven far below zero, or factorization failure after the
    jitter ladder is exhausted (CLI exit code 3)."""
