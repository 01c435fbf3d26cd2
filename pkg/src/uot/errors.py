"""Exception types shared across the package."""


class UotError(Exception):
    """Base class for all package errors."""


class InvalidMeasureError(UotError):
    """Raised when weights/points fail the measure invariants."""


class DomainError(UotError):
    """Raised when an input leaves the mathematical domain of an operation."""


class UnsupportedEntropyError(UotError):
    """Raised when an operation is not defined for the given marginal penalty."""


class InfeasibleError(UotError):
    """Raised when the transport problem has no finite value."""


class FDDomainError(UotError):
    """Raised when a finite-difference probe hits an infinite value."""
