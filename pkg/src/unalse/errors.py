"""Exception hierarchy shared by all modules."""


class UnalseError(Exception):
    """Base class for all package errors."""


class DimensionError(UnalseError, ValueError):
    pass


class NumericError(UnalseError, ArithmeticError):
    pass


class NotPositiveDefiniteError(NumericError):
    """Raised when a matrix fails the positive-definiteness gate.

    The smallest eigenvalue is kept on the exception for diagnostics.
    """

    def __init__(self, min_eigenvalue, message=None):
        self.min_eigenvalue = float(min_eigenvalue)
        super().__init__(message or f"matrix is not positive definite (min eigenvalue {self.min_eigenvalue:.6g})")


class DegenerateInputError(UnalseError, ValueError):
    pass


class NoAdmissibleSolutionError(UnalseError):
    pass


class ParseError(UnalseError, ValueError):
    def __init__(self, message, row=None, col=None):
        self.row = row
        self.col = col
        where = ""
        if row is not None:
            where = f" (row {row}" + (f", column {col})" if col is not None else ")")
        super().__init__(message + where)


class BundleError(UnalseError):
    """Missing or inconsistent files in an on-disk bundle."""
