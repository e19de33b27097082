"""Exception hierarchy.

Two families: input validation problems (``ValidationError``) and numerical
failures (``NumericalError``).  The command line maps them to exit codes 1
and 2.
"""


class GrazingError(Exception):
    """Base class for every error raised by the package."""


class ValidationError(GrazingError, ValueError):
    """Arguments violate a precondition."""


class DomainError(ValidationError):
    """Argument outside the domain of the function."""


class PoleError(ValidationError):
    """Parameter sits on a pole of a Gamma factor."""


class DivergenceError(ValidationError):
    """The requested value is infinite."""


class RegionError(ValidationError):
    """Point outside the region where a quantity is defined."""


class FamilyIndexError(ValidationError):
    """Unsupported family index."""


class NumericalError(GrazingError, ArithmeticError):
    """A numerical procedure failed to meet its tolerance."""


class ConvergenceError(NumericalError):
    """Series, quadrature or iteration did not converge."""


class SolverError(NumericalError):
    """Linear solve failed or the system is numerically singular."""
