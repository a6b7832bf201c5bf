"""Exception hierarchy.

Every message names the invariant or precondition that failed so CLI users
can map an error straight back to the contract of the operation.
"""


class UsitirError(ValueError):
    """Base class for all validation and domain errors raised by usitir."""


class InvalidOperatorError(UsitirError):
    pass


class InvalidStateError(UsitirError):
    pass


class DimensionMismatchError(UsitirError):
    pass


class UnsupportedStatisticsError(UsitirError):
    pass


class DomainError(UsitirError):
    """A scalar function was asked for a value outside its domain."""


class PureLimitError(UsitirError):
    """The requested thermal state only exists as a limit (infinite field)."""


class IncompatibleControlSetError(UsitirError):
    pass


class BracketError(UsitirError):
    """Bracket expansion for a monotone root search exceeded its limit."""
