"""Shared exception types.

Exit-code mapping lives in the CLI: usage/config problems exit 2, file
problems exit 3, non-finite numerics exit 4, failed verification exits 1.
"""


class HomoencError(Exception):
    pass


class UsageError(HomoencError):
    """Caller violated a precondition (bad sizes, wrong call order, ...)."""


class ConfigError(HomoencError):
    """Inconsistent configuration (objective/dataset/model mismatch)."""


class DomainError(HomoencError):
    """Argument outside a function's or family's support."""


class ParseError(HomoencError):
    """Malformed persisted file; message carries the offending line."""


class NumericError(HomoencError):
    """Non-finite value where a finite one is required."""


class GradCheckError(HomoencError):
    """Finite-difference probe produced a non-finite estimate."""
