from typing import Optional


class QuaternionRiccatiError(Exception):
    """Base class for all errors raised by this package."""


class NearZeroDivisor(QuaternionRiccatiError, ZeroDivisionError):
    """Attempt to invert a quaternion whose norm is below the zero threshold."""


class NotASymbol(QuaternionRiccatiError, ValueError):
    """A 4x4 matrix does not follow the quaternion symbol sign pattern."""


class OutOfDomain(QuaternionRiccatiError, ValueError):
    """A coefficient function was evaluated outside of its validity interval."""


class OutOfRange(QuaternionRiccatiError, ValueError):
    """A trajectory was queried outside of its covered interval."""


class ToleranceNotMet(QuaternionRiccatiError):
    """Adaptive quadrature could not reach the requested tolerance."""

    def __init__(self, message: str, error_estimate: float):
        super().__init__(message)
        self.error_estimate = error_estimate


class SchemaError(QuaternionRiccatiError, ValueError):
    """Malformed scenario or coefficient configuration."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class FamilySingular(QuaternionRiccatiError, ZeroDivisionError):
    """1 + lambda * mu is numerically zero: the family member has a pole."""

    def __init__(self, message: str, pole_time: Optional[float] = None):
        super().__init__(message)
        self.pole_time = pole_time


class NuVanishes(QuaternionRiccatiError):
    """The tail integral nu vanishes, so no extremal solution passes here."""


class PhiVanishes(QuaternionRiccatiError):
    """The first component of a system solution vanished."""

    def __init__(self, message: str, time: float):
        super().__init__(message)
        self.time = time
