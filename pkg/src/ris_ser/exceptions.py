"""Exception hierarchy shared by all modules."""


class RisSerError(Exception):
    """Base class for every error raised by the toolkit."""


class DomainError(RisSerError, ValueError):
    """An argument lies outside the domain of the function."""


class ComplexResultError(DomainError):
    """The literal amplitude law would produce a complex number."""


class BracketError(RisSerError, ValueError):
    """The root bracket does not enclose a sign change."""


class ConvergenceError(RisSerError, ArithmeticError):
    """An iterative routine stopped before reaching its tolerance.

    Attributes
    ----------
    estimate : float
        Last estimate produced before giving up.
    error : float
        Achieved error indicator for ``estimate``.
    """

    def __init__(self, message, estimate=float("nan"), error=float("inf")):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class DegenerateRatesError(RisSerError, ValueError):
    """Hypoexponential formulas need pairwise distinct gains."""


class DivergenceError(RisSerError, ValueError):
    """A negative moment does not exist for the requested order."""


class ValidityError(RisSerError, ValueError):
    """An asymptotic expression is used outside its validity condition."""


class InsufficientDataError(RisSerError, ValueError):
    """Not enough points to carry out a fit."""


class ConfigError(RisSerError, ValueError):
    """Invalid experiment configuration; the message names the field."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
