"""Exception hierarchy.

Validation problems (bad input, contract violations) derive from
``ValidationError``; failures of a numerical procedure on valid input derive
from ``NumericalError``. The CLI maps the two families to distinct exit codes.
"""


class ValidationError(ValueError):
    pass


class SchemaError(ValidationError):
    """A required CSV column is missing."""

    def __init__(self, column, message=None):
        self.column = column
        super().__init__(message or f"missing required column {column!r}")


class ParseError(ValidationError):
    """A CSV row could not be parsed; ``row`` is the 1-based data row index."""

    def __init__(self, row, message):
        self.row = row
        super().__init__(f"row {row}: {message}")


class NumericalError(ArithmeticError):
    pass


class EmptySampleError(NumericalError):
    """No observation of an arm carries positive kernel weight at a point."""

    def __init__(self, message, arm=None, point=None):
        self.arm = arm
        self.point = point
        super().__init__(message)


class ConvergenceError(NumericalError):
    def __init__(self, message, grad_norm=None):
        self.grad_norm = grad_norm
        super().__init__(message)
