"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 1, DataError -> 2,
NumericError -> 3.  Library code raises them directly.
"""

from __future__ import annotations


class HtimError(Exception):
    """Base class for all package errors."""


class ConfigError(HtimError):
    """Invalid configuration or unusable combination of options."""


class DataError(HtimError):
    """Input data violates a documented contract."""


class DataFormatError(DataError):
    """Parse failure in an input file; carries file and line context."""

    def __init__(self, path: str, line: int, message: str):
        self.path = str(path)
        self.line = line
        super().__init__(f"{self.path}:{line}: {message}")


class NumericError(HtimError):
    """Numeric routine failed to converge or produced non-finite values."""
