"""Exception types shared across the package."""


class ScalebalError(Exception):
    """Base class for all package errors."""


class FixedPointOverflow(ScalebalError, ArithmeticError):
    """A value does not fit in the requested (b1, b2) format."""


class DomainError(ScalebalError, ValueError):
    """Argument outside the mathematical domain of a function."""


class FormatError(ScalebalError, ValueError):
    """Malformed fixed-point value, format tuple or text encoding."""


class OutOfRange(ScalebalError, IndexError):
    """Oracle index outside the matrix."""


class MatrixFormatError(ScalebalError, ValueError):
    """Matrix or marginals file violates the input model."""


class PrecondViolated(ScalebalError, ValueError):
    """A documented precondition of an estimator or solver does not hold."""


class EmptyRow(PrecondViolated):
    """Row or column view has no nonzero entry."""


class NotEntrywisePositive(PrecondViolated):
    """The positive-matrix preset was asked to run on a matrix with zeros."""


class NonzeroDiagonal(PrecondViolated):
    """Balancing input has a nonzero diagonal entry."""


class EmptyRowOrColumn(PrecondViolated):
    """Balancing input has a row or column with no nonzero entry."""


class BadDimensions(ScalebalError, ValueError):
    """Gadget construction called with incompatible n and s."""
