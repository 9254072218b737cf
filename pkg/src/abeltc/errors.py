"""Exception hierarchy shared by all abeltc modules.

Two families matter to callers: :class:`ValidationError` for bad input
(malformed expressions, out-of-range parameters, non-monotone ``phi``) and
:class:`NumericalError` for failures that happen while computing. The CLI
maps the first to exit code 1 and the second to exit code 2.
"""

from __future__ import annotations


class AbelError(Exception):
    """Base class for every error raised by abeltc."""


class ValidationError(AbelError, ValueError):
    """Invalid user input: configs, expressions, problem parameters."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class NumericalError(AbelError, ArithmeticError):
    """A computation could not be completed."""
