"""Exception types shared across the package.

The command-line front end maps each class to a distinct exit code, so new
error conditions should reuse one of these rather than raising bare
ValueError.
"""

from __future__ import annotations


class EvkwsError(Exception):
    """Base class for package-specific failures."""


class ParseError(EvkwsError):
    """File content could not be decoded under the declared format.

    Carries the 1-based line number (text formats) or byte offset (binary)
    of the first offending record when known.
    """

    def __init__(self, message: str, *, line: int | None = None,
                 offset: int | None = None):
        if line is not None:
            message = f"{message} (line {line})"
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.line = line
        self.offset = offset


class ValidationError(EvkwsError):
    """Well-formed data violates a documented invariant."""


class OrderingError(ValidationError):
    """Timestamps regressed where non-decreasing order is required."""


class ConfigError(EvkwsError):
    """Run configuration is missing, inconsistent, or out of range."""
