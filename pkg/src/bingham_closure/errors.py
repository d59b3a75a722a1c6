"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain an operation supports."""


class ConvergenceError(ArithmeticError):
    """An iterative solver or quadrature failed to reach its tolerance."""


class NotUniaxialError(ValueError):
    """A second moment does not have the repeated eigenvalue the uniaxial path needs."""


class TableFormatError(ValueError):
    """A closure table file is malformed, corrupted or of an unknown version."""


class InputFormatError(ValueError):
    """A moment batch file has a bad header or a malformed row."""
