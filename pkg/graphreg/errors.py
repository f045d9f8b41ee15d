"""Exception hierarchy shared by the library and the CLI.

The CLI maps each family to an exit code (see graphreg.cli).
"""

from __future__ import annotations


class GraphRegError(Exception):
    """Base class for all graphreg errors."""


class ValidationError(GraphRegError, ValueError):
    """Raised when an input violates a shape, sign or symmetry requirement."""


class NumericalBreakdownError(GraphRegError, ArithmeticError):
    """Raised when a factorization or inverse update cannot be carried out."""


class SingularSystemError(NumericalBreakdownError):
    """Raised when the normal-equation matrix is singular."""


class DataIOError(GraphRegError, OSError):
    """Raised when a data file cannot be read, parsed or written."""
