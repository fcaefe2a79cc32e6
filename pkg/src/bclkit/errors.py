"""Exception hierarchy for bclkit."""

from __future__ import annotations


class BclError(Exception):
    """Base class for every error raised by the package.

    Parameters
    ----------
    message : str
        Human readable description.
    errors : list of str, optional
        Every problem found, when a validator collected more than one.
    """

    def __init__(self, message: str, errors: list[str] | None = None):
        super().__init__(message)
        self.errors = list(errors) if errors else [message]


class InvalidInput(BclError, ValueError):
    """Malformed input: non-finite entries, wrong shapes, bad arguments."""


class NotHermitian(BclError, ValueError):
    """Matrix is not Hermitian within tolerance."""


class NotUnitary(BclError, ValueError):
    """Matrix is not unitary within tolerance."""


class DimensionMismatch(BclError, ValueError):
    """Dimensions violate a structural constraint."""


class TensorFormViolation(BclError, ValueError):
    """The unitary does not factor as identity tensor a block on the required subspace."""


class PairingViolation(BclError, ArithmeticError):
    """An interior defect eigenvalue has no partner of opposite sign."""


class IndexMismatch(BclError, ArithmeticError):
    """The two routes to the Fredholm index disagree."""


class InconsistentClassification(BclError, ArithmeticError):
    """Conditions that should be equivalent evaluated differently."""


class BudgetExceeded(BclError, MemoryError):
    """A truncation would exceed the configured dimension budget."""


class DegreeBudgetExceeded(BudgetExceeded):
    """A graded vector would exceed the configured maximum degree."""


__all__ = [
    "BclError",
    "InvalidInput",
    "NotHermitian",
    "NotUnitary",
    "DimensionMismatch",
    "TensorFormViolation",
    "PairingViolation",
    "IndexMismatch",
    "InconsistentClassification",
    "BudgetExceeded",
    "DegreeBudgetExceeded",
]
