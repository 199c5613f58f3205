"""Exception types shared across the package.

Each maps onto a CLI exit code (see ``mmcast.cli``).
"""


class MmcastError(Exception):
    exit_code = 1


class ValidationError(MmcastError, ValueError):
    """Bad scenario / tree / argument values."""

    exit_code = 2


class DomainError(ValidationError):
    """Argument outside the mathematical domain of an operation."""


class NoCoverageError(MmcastError):
    """A user lies outside the main lobe of the beam serving it."""

    exit_code = 2


class CapacityError(MmcastError):
    """State or action space too large for the requested solver."""

    exit_code = 3


class NumericalError(MmcastError, ArithmeticError):
    exit_code = 4


class LookupFailure(MmcastError, KeyError):
    """Policy table has no row for the requested state."""
