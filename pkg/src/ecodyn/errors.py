from __future__ import annotations


class EcodynError(Exception):
    """Base class for every error raised by ecodyn."""

    code = "runtime"
    exit_code = 3


class ValidationError(EcodynError, ValueError):
    """Bad input: wrong dimensions, broken model invariants, bad config fields."""

    code = "validation"
    exit_code = 2

    def __init__(self, message: str, field: str | None = None) -> None:
        self.field = field
        self.reason = message
        super().__init__(f"{field}: {message}" if field else message)


class DomainError(EcodynError, ValueError):
    """A state lies outside the admissible region."""

    code = "domain"

    def __init__(
        self, message: str, coordinate: int | None = None, time: float | None = None
    ) -> None:
        self.coordinate = coordinate
        self.time = time

        details = []
        if coordinate is not None:
            details.append(f"x{coordinate + 1}")
        if time is not None:
            details.append(f"t={time!r}")
        suffix = f" ({', '.join(details)})" if details else ""
        super().__init__(message + suffix)


class DerivationError(EcodynError, ArithmeticError):
    """An algebraic condition needed by a Hamiltonian derivation fails."""

    code = "derivation"

    def __init__(self, message: str, defect: float | None = None) -> None:
        self.defect = defect
        super().__init__(message)


class IntegrationError(EcodynError, ArithmeticError):
    """Step-size underflow or a non-finite state during integration."""

    code = "integration"


class FitError(EcodynError, ArithmeticError):
    code = "fit"


class DataIOError(EcodynError, OSError):
    code = "io"
    exit_code = 4


class VerificationError(EcodynError):
    """A structure residual exceeds its threshold."""

    code = "verify"
