"""Exception hierarchy shared by every module of the package."""


class LpSantaloError(Exception):
    """Base class for all package errors."""


class DimensionError(LpSantaloError, ValueError):
    """Raised when a point or operand has the wrong dimension."""


class DomainError(LpSantaloError, ValueError):
    """Raised when an argument lies outside the mathematical domain of an operation."""


class DivergenceError(LpSantaloError, ArithmeticError):
    """Raised when an integral is numerically detected to be infinite."""


class DegenerateError(LpSantaloError, ArithmeticError):
    """Raised when an integral is numerically detected to vanish."""


class UnsupportedError(LpSantaloError, NotImplementedError):
    """Raised when an operation is not available for a function kind."""


class ConvergenceError(LpSantaloError, RuntimeError):
    """Raised when an iterative solver fails to reach its tolerance."""
