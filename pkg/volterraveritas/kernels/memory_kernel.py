from __future__ import annotations
from dataclasses import dataclass
from enum import Enum
import logging
import math
import re

import numpy as np
from scipy import integrate, special

from volterraveritas.utils.errors import QuadratureAccuracyError, ValidationError
from volterraveritas.utils.utils import is_finite_number

logger = logging.getLogger(__name__)

_DECIMAL = r'[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?'
_SPEC_PATTERN = re.compile(rf'^(exp|mexp):({_DECIMAL}),({_DECIMAL})(?:,(\d+))?$')

#: Multiple of 1/gamma where half-line integrals switch from quadrature to the analytic tail.
TAIL_CUTOFF = 50.0


class KernelFamily(str, Enum):
    EXPONENTIAL = 'exp'
    MONOMIAL_EXPONENTIAL = 'mexp'


@dataclass(frozen=True)
class MemoryKernel:
    """Scalar memory kernel a(z) = beta * z^m * e^{-gamma z}, holomorphic on every sector of
    half-opening below pi/2.

    Args:
        family: EXPONENTIAL (m must be 0) or MONOMIAL_EXPONENTIAL.
        beta: amplitude, >= 0. beta = 0 switches the memory off.
        gamma: decay rate, > 0.
        power: m, nonnegative integer.
    """
    family: KernelFamily
    beta: float
    gamma: float
    power: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'family', KernelFamily(self.family))
        if not is_finite_number(self.beta) or self.beta < 0.0:
            raise ValidationError(f'must be a finite number >= 0, got {self.beta!r}', 'beta')
        if not is_finite_number(self.gamma) or self.gamma <= 0.0:
            raise ValidationError(f'must be a finite number > 0, got {self.gamma!r}', 'gamma')
        if isinstance(self.power, bool) or not isinstance(self.power, (int, np.integer)) or self.power < 0:
            raise ValidationError(f'must be a nonnegative integer, got {self.power!r}', 'm')
        if self.family is KernelFamily.EXPONENTIAL and self.power != 0:
            raise ValidationError('the exponential family has m = 0', 'm')
        object.__setattr__(self, 'beta', float(self.beta))
        object.__setattr__(self, 'gamma', float(self.gamma))
        object.__setattr__(self, 'power', int(self.power))

    @classmethod
    def exponential(cls, beta: float, gamma: float) -> MemoryKernel:
        return cls(KernelFamily.EXPONENTIAL, beta, gamma, 0)

    @classmethod
    def monomial_exponential(cls, beta: float, gamma: float, m: int) -> MemoryKernel:
        return cls(KernelFamily.MONOMIAL_EXPONENTIAL, beta, gamma, m)

    @property
    def is_exponential(self) -> bool:
        return self.power == 0

    @property
    def spec(self) -> str:
        """CLI grammar form, exp:beta,gamma or mexp:beta,gamma,m."""
        if self.family is KernelFamily.EXPONENTIAL:
            return f'exp:{self.beta!r},{self.gamma!r}'
        return f'mexp:{self.beta!r},{self.gamma!r},{self.power}'

    def scaled(self, factor: float) -> MemoryKernel:
        return MemoryKernel(self.family, self.beta * factor, self.gamma, self.power)

    def eval(self, z):
        """
        Closed-form value a(z).

        Args:
            z: complex scalar or array with Re z > 0. Re z = 0 is accepted for m = 0.

        Returns:
            complex scalar or array.
        """
        z = np.asarray(z, dtype=complex)
        real = z.real
        if np.any(real < 0.0) or (self.power > 0 and np.any(real == 0.0)):
            raise ValidationError('kernel is only guaranteed holomorphic for Re z > 0', 'z')
        value = self.beta * z ** self.power * np.exp(-self.gamma * z)
        return value if value.ndim else complex(value)

    __call__ = eval

    def on_halfline(self, t):
        """Real values a(t) for t >= 0, including a(0)."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0.0):
            raise ValidationError('kernel is evaluated on the half-line t >= 0', 't')
        value = self.beta * t ** self.power * np.exp(-self.gamma * t)
        return value if value.ndim else float(value)

    def lp_closed_form(self, p: float, horizon: float) -> float:
        """
        (integral_0^T |a(t)|^p dt)^(1/p) through the regularized incomplete gamma function.
        """
        _check_exponent(p, minimum=1.0)
        if horizon == 0.0 or self.beta == 0.0:
            return 0.0
        shape = self.power * p + 1.0
        rate = p * self.gamma
        fraction = 1.0 if math.isinf(horizon) else special.gammainc(shape, rate * horizon)
        return (self.beta ** p * special.gamma(shape) * fraction / rate ** shape) ** (1.0 / p)

    def _lp_tail(self, p: float, start: float) -> float:
        shape = self.power * p + 1.0
        rate = p * self.gamma
        return self.beta ** p * special.gamma(shape) * special.gammaincc(shape, rate * start) / rate ** shape

    def lp_halfline_norm(self, p: float, horizon: float, tol: float = 1e-10) -> float:
        """
        (integral_0^T |a(t)|^p dt)^(1/p) by adaptive quadrature.

        Horizons beyond TAIL_CUTOFF / gamma (including math.inf) are integrated up to the cutoff and
        completed with the analytic tail.

        Args:
            p: exponent >= 1.
            horizon: T >= 0, may be math.inf.
            tol: relative accuracy the quadrature must certify.

        Returns:
            The L^p(0, T) norm of a.

        Raises:
            QuadratureAccuracyError: the quadrature error estimate exceeds tol.
        """
        _check_exponent(p, minimum=1.0)
        if not horizon >= 0.0:
            raise ValidationError(f'must be >= 0, got {horizon!r}', 'T')
        if horizon == 0.0 or self.beta == 0.0:
            return 0.0
        cutoff = TAIL_CUTOFF / self.gamma
        upper = min(horizon, cutoff)
        value, error = integrate.quad(lambda t: abs(self.on_halfline(t)) ** p, 0.0, upper,
                                      epsabs=0.0, epsrel=tol * 1e-2, limit=200)
        if error > tol * max(value, np.finfo(float).tiny):
            raise QuadratureAccuracyError(f'L^{p} norm of {self.spec} on (0, {upper})', error / value, tol)
        if horizon > cutoff:
            value += self._lp_tail(p, cutoff)
        return value ** (1.0 / p)


def parse_kernel_spec(text: str) -> MemoryKernel:
    """
    Parses the CLI kernel grammar.

    Examples:
        parse_kernel_spec('exp:1,1')      => exponential(1, 1)
        parse_kernel_spec('mexp:2,3,1')   => monomial_exponential(2, 3, m=1)

    Raises:
        ValidationError: anything that does not match the grammar or violates the parameter ranges.
    """
    match = _SPEC_PATTERN.match(text.strip()) if isinstance(text, str) else None
    if match is None:
        raise ValidationError(f'expected exp:beta,gamma or mexp:beta,gamma,m, got {text!r}', 'kernel')
    family, beta, gamma, power = match.groups()
    if family == 'exp':
        if power is not None:
            raise ValidationError(f'exp takes two parameters, got {text!r}', 'kernel')
        return MemoryKernel.exponential(float(beta), float(gamma))
    if power is None:
        raise ValidationError(f'mexp takes three parameters, got {text!r}', 'kernel')
    return MemoryKernel.monomial_exponential(float(beta), float(gamma), int(power))


def cauchy_riemann_residual(kernel: MemoryKernel, theta: float, radial_points: int = 12,
                            angular_points: int = 9, step: float = 1e-5) -> float:
    """
    Numerical holomorphy check on a polar grid inside the sector |arg z| < theta.

    With a = u + iv, the Cauchy-Riemann residuals u_x - v_y and u_y + v_x are approximated by centered
    differences and the largest absolute value over the grid is returned.
    """
    if not 0.0 < theta <= math.pi / 2:
        raise ValidationError(f'must lie in (0, pi/2], got {theta!r}', 'theta')
    radii = np.linspace(0.1, 5.0, radial_points)
    angles = np.linspace(-0.9 * theta, 0.9 * theta, angular_points)
    z = (radii[:, None] * np.exp(1j * angles[None, :])).ravel()
    dx = (kernel.eval(z + step) - kernel.eval(z - step)) / (2.0 * step)
    dy = (kernel.eval(z + 1j * step) - kernel.eval(z - 1j * step)) / (2.0 * step)
    first = dx.real - dy.imag
    second = dy.real + dx.imag
    return float(max(np.max(np.abs(first)), np.max(np.abs(second))))


def _check_exponent(p: float, minimum: float):
    if not is_finite_number(p) or p < minimum:
        raise ValidationError(f'exponent must be a finite number >= {minimum}, got {p!r}', 'p')
