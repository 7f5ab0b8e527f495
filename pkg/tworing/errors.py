"""
Exception hierarchy for tworing.

Every error raised on purpose by the library derives from TworingError and
from the builtin exception that best describes it, so callers can catch
either.
"""


class TworingError(Exception):
    """Base class for all tworing errors."""


class InvalidParamsError(TworingError, ValueError):
    """Model, grid or solver parameters are out of range."""


class BasisMismatchError(TworingError, ValueError):
    """Operands carry different (or unsupported) basis tags."""


class IllConditionedError(TworingError, ArithmeticError):
    """Critical points are too close to each other to be separated."""


class SingularMatrixError(TworingError, ArithmeticError):
    """A matrix that must be inverted is singular."""


class DegenerateSplittingError(TworingError, ArithmeticError):
    """B_n(c) = 0, so lambda_n = mu_n and the eigen-splitting fails."""


class BranchError(TworingError, ArithmeticError):
    """An n-th root of a vanishing eigenvalue was requested."""


class InconsistencyError(TworingError, RuntimeError):
    """An identity that must hold by construction was violated."""


class DivergenceError(TworingError, RuntimeError):
    """The relaxation solver residual kept growing."""


class NonDiagonalError(TworingError, ValueError):
    """Metric blocks were expected to be diagonal."""
