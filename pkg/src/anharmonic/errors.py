"""Exception types shared across the package."""


class AnharmonicError(Exception):
    """Base class for all package errors."""


class NonElementaryIntegral(AnharmonicError):
    """An antiderivative left the closed hyperbolic family."""


class DivergesAtZero(AnharmonicError):
    """Expression has a pole at tau = 0."""


class ConstraintViolation(AnharmonicError):
    """An integration constant cannot make a coefficient regular at tau = 0."""


class SymmetryViolation(AnharmonicError):
    """A coefficient table failed its symmetry or ODE self-check."""


class NoFiniteLimit(AnharmonicError):
    """The low-temperature limit of a free-energy coefficient diverges."""


class NoCriterionRoot(AnharmonicError):
    """No derivative of the resummed free energy vanishes in the scan window."""


class NoBracket(AnharmonicError):
    """Shooting could not bracket an eigenvalue inside the search window."""
