"""
Errors Module
=============
Exception hierarchy shared by the lab.
"""

from typing import List, Sequence


class HeightLabError(Exception):
    """Base class for every error raised by the lab."""


class ValuationError(HeightLabError, ValueError):
    """Valuation, absolute value or support of zero."""


class InvalidParameterError(HeightLabError, ValueError):
    """Parameter outside the family (lambda in {0, 1, -1}, bad sign, ...)."""


class DegenerateIterateError(HeightLabError, ArithmeticError):
    """An iterate F_n has zero resultant."""


class DegenerateParameterError(HeightLabError, ArithmeticError):
    """The specialized map Phi_t has zero resultant."""


class ResourceLimitError(HeightLabError, RuntimeError):
    """Symbolic depth or coefficient size above the configured guard."""


class ConfigError(HeightLabError, ValueError):
    """Malformed or invalid configuration."""


class CacheError(HeightLabError, IOError):
    """Corrupt or unreadable cache file."""


class RootFindingError(HeightLabError, ArithmeticError):
    """Root solver did not converge; keeps whatever roots it had."""

    def __init__(self, message: str, partial_roots: Sequence[complex] = ()):
        super().__init__(message)
        self.partial_roots: List[complex] = list(partial_roots)
