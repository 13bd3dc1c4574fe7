"""Exception and warning types shared across the package."""


class SveError(Exception):
    """Base class for all errors raised by svesim."""


class ParameterError(SveError, ValueError):
    """A parameter lies outside its admissible range."""


class DomainError(SveError, ValueError):
    """A function was evaluated outside its domain (e.g. a singular kernel at t <= 0)."""


class RangeError(SveError, ValueError):
    """A tabulated object was queried outside its tabulation range."""


class PreconditionError(SveError):
    """An operation was called on inputs that violate its stated precondition."""


class EstimationError(SveError):
    """A statistical estimate could not be formed (e.g. degenerate ensemble)."""


class AccuracyWarning(UserWarning):
    """A numerical result may not meet its nominal accuracy."""


class RegularityWarning(UserWarning):
    """A regularity exponent is non-positive, so no Hoelder regularity is guaranteed."""
