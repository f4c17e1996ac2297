"""Exception types raised across the package."""


class RecoveryError(Exception):
    """Base class for all package errors."""


class BadArguments(RecoveryError, ValueError):
    pass


class DimensionMismatch(RecoveryError, ValueError):
    pass


class RankDeficient(RecoveryError, ArithmeticError):
    """The restricted least-squares system is numerically singular."""


class TooLarge(RecoveryError, ValueError):
    """An exhaustive enumeration would exceed its size guard."""


class DegenerateColumn(RecoveryError, ArithmeticError):
    pass


class FormatError(RecoveryError, ValueError):
    """A binary container could not be parsed."""
