"""Exception hierarchy shared by every module."""

from __future__ import annotations


class CbpError(Exception):
    """Base class for all library errors."""


class DomainError(CbpError, ValueError):
    """An argument lies outside the mathematically valid range."""


class ValidationError(DomainError):
    """A body spec or configuration is malformed."""


class BracketError(DomainError):
    """A root bracket does not contain a sign change."""


class PrecisionError(CbpError, ArithmeticError):
    """A numerical estimate did not reach the requested accuracy.

    ``partial`` carries the best value obtained, when one exists.
    """

    def __init__(self, message: str, partial: float | None = None):
        super().__init__(message)
        self.partial = partial
