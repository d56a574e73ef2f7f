"""Exception hierarchy shared by all modules.

Exit code mapping used by the CLI: ValidationError -> 1,
NumericalError -> 2, OSError -> 3.
"""


class RatingSdeError(Exception):
    """Base class for all library errors."""


class ValidationError(RatingSdeError, ValueError):
    """Invalid input: bad dimensions, broken invariants, inconsistent config."""


class NumericalError(RatingSdeError, ArithmeticError):
    """A numerical procedure failed to produce a usable result."""
