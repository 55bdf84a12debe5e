from __future__ import annotations

"""
Exception hierarchy shared by every module.

Precondition violations are ``ValidationError`` (a ``ValueError``), anything that goes wrong while
computing is a ``NumericalError`` (an ``ArithmeticError``). The CLI turns the first into exit
code 2 and the second into exit code 3.
"""


class VolterraVeritasError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(VolterraVeritasError, ValueError):
    """An input violates the precondition of the operation it was passed to.

    Args:
        message: Human readable description.
        field: Name of the offending parameter, if there is one.
    """

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        if field:
            message = f'{field}: {message}'
        super().__init__(message)


class NumericalError(VolterraVeritasError, ArithmeticError):
    """A computation could not produce a trustworthy number."""


class SpectralPointError(NumericalError):
    """A resolvent was requested at a point of the spectrum."""

    def __init__(self, point: float, eigenvalue: float):
        self.point = point
        self.eigenvalue = eigenvalue
        super().__init__(f'{point!r} lies in the spectrum (eigenvalue {-eigenvalue!r} of A)')


class QuadratureAccuracyError(NumericalError):
    """Adaptive quadrature stopped before reaching the requested tolerance."""

    def __init__(self, what: str, achieved: float, requested: float):
        self.achieved = achieved
        self.requested = requested
        super().__init__(f'{what}: quadrature reached {achieved:.3e}, requested {requested:.3e}')


class DivergenceError(NumericalError):
    """An integral that defines a norm is infinite."""


class StabilityError(NumericalError):
    """A time stepper cannot advance with the given step size."""


class UnsupportedKernelError(NumericalError):
    """A solver was handed a memory kernel it has no formulation for."""


class EnsembleMemberError(NumericalError):
    """One member of a seeded ensemble failed.

    Args:
        sample_id: Index of the failed member inside the ensemble.
        cause: The error it raised.
    """

    def __init__(self, sample_id: int, cause: Exception):
        self.sample_id = sample_id
        self.cause = cause
        super().__init__(f'ensemble member {sample_id} failed: {cause}')
