"""Exception types shared across the package.

Every error raised deliberately by this package derives from
:class:`AsianvolError`, so callers (and the CLI) can separate expected
failure modes from genuine bugs.
"""

from __future__ import annotations


class AsianvolError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(AsianvolError):
    """A parameter, config entry, or input table failed validation."""


class DomainError(AsianvolError):
    """An input lies outside the mathematical domain of an operation.

    Examples: evaluating a tabulated surface outside its grid, asking for
    a short-maturity delta expansion at an exponent where none exists, or
    an inverse volatility transform whose bracket turns negative.
    """


class NumericError(AsianvolError):
    """A numerical routine failed to converge to the requested tolerance."""
