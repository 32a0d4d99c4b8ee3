"""Exception hierarchy shared by all sepscan modules."""

from __future__ import annotations


class SepscanError(Exception):
    """Base class for all errors raised by this package."""


class SubsetError(SepscanError, ValueError):
    """A variable subset violates its contract (index out of range, bad syntax)."""


class PartitionError(SepscanError, ValueError):
    """Blocks fail to form a partition: overlap, gap, or empty block."""


class ExpressionError(SepscanError, ValueError):
    """Expression source cannot be parsed or references unknown names."""

    def __init__(self, message: str, position: int | None = None):
        self.position = position
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


class EvaluationError(SepscanError, RuntimeError):
    """A function evaluation failed (external process error, protocol violation)."""


class NumericError(EvaluationError):
    """An evaluation produced NaN or Inf; carries the offending point."""

    def __init__(self, message: str, point=None):
        self.point = point
        if point is not None:
            message = f"{message} at point {tuple(point)}"
        super().__init__(message)


class FeasibilityError(SepscanError):
    """A requested exact computation exceeds the configured evaluation budget."""
