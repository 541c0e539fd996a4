"""Exception types shared across the package.

Each class maps onto one CLI exit code (see :mod:`su2qec.cli`).
"""


class SU2QECError(Exception):
    """Base class for all package errors."""

    exit_code = 2


class DomainError(SU2QECError, ValueError):
    """Arguments outside the mathematical domain of an operation."""

    exit_code = 1


class ConfigError(SU2QECError, ValueError):
    """Invalid sweep configuration or command-line input."""

    exit_code = 1


class NumericalContractError(SU2QECError, ArithmeticError):
    """A computed quantity violated a stated numerical invariant."""

    exit_code = 2


class PremiseError(NumericalContractError):
    """The premise of a construction (e.g. exact off-diagonal zeros) fails."""


class DimensionGuardError(SU2QECError, MemoryError):
    """Refusal to build an explicit object above the size guard."""

    exit_code = 3
