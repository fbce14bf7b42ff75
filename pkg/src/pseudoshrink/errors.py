"""Exception hierarchy shared by every module."""


class PseudoshrinkError(Exception):
    """Base class for all package errors."""


class ArgumentError(PseudoshrinkError, ValueError):
    """Malformed input: wrong shape, order, tag or sign."""


class DomainError(PseudoshrinkError, ValueError):
    """Input outside the regime where a formula is defined (e.g. c <= 1 at t = 0)."""


class ConvergenceError(PseudoshrinkError, RuntimeError):
    """A root finder or search failed to bracket or converge."""


class SingularityError(PseudoshrinkError, ArithmeticError):
    """An ordinary inverse was requested for a singular matrix."""


class DegeneracyError(PseudoshrinkError, ArithmeticError):
    """A ratio formula hit a zero or sign-violating denominator.

    ``quantity`` names the offending expression so callers can log it.
    """

    def __init__(self, message: str, quantity: str = ""):
        super().__init__(message)
        self.quantity = quantity


class SearchError(ConvergenceError):
    """Tuning-parameter search found no finite objective value."""
