"""Numerical laboratory for the modified complex Busemann-Petty problem."""

from cbplab.errors import BracketError, CbpError, DomainError, PrecisionError, ValidationError

__version__ = "0.1.0"

__all__ = [
    "BracketError",
    "CbpError",
    "DomainError",
    "PrecisionError",
    "ValidationError",
    "__version__",
]
