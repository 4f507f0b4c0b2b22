"""Exception hierarchy shared by every module in the package."""

from __future__ import annotations


class RushError(Exception):
    """Base class for all errors raised by :mod:`rush`."""


class UnknownArm(RushError, KeyError):
    """An arm id was requested that the task does not contain."""

    def __str__(self) -> str:  # KeyError quotes its argument otherwise
        return Exception.__str__(self)


class HorizonExceeded(RushError):
    """A pull would read past the final entry of a tabular curve."""


class MissingLoss(RushError):
    """An active arm has no observation in the current rung."""


class BudgetTooSmall(RushError):
    """The budget yields zero pulls per arm in the first rung."""


class TiedBestArm(RushError):
    """The budget bound needs a strict best arm but some gap is zero."""


class InvalidSpec(RushError, ValueError):
    """A generator, scheduler or sequence specification is malformed."""


class LossOutOfRange(RushError, ValueError):
    """A loss outside [0, 1] cannot be inverted."""


class FormatError(RushError, ValueError):
    """A bench or store file failed validation."""


class SpecMismatch(RushError, ValueError):
    """Two sequence specs differ in something other than the scheduler."""
