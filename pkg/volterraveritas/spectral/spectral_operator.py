from __future__ import annotations
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional
import logging

import numpy as np

from volterraveritas.utils.errors import SpectralPointError, ValidationError

logger = logging.getLogger(__name__)

"""
Galerkin-truncated eigenbasis model of the Laplacian on the interval (0, 1).

Everything lives in coefficient space: a StateVector holds the coefficients of a function of L^2(0,1)
in the orthonormal eigenbasis of the operator, and every operator of interest (A, T(t), R(lambda, A),
(-A)^alpha) is diagonal there, so applying it is a componentwise product.
"""


class BoundaryKind(str, Enum):
    DIRICHLET = 'dirichlet'
    NEUMANN = 'neumann'


@dataclass(frozen=True, eq=False)
class StateVector:
    """Coefficients of an X-valued state in the eigenbasis of a SpectralOperator.

    Args:
        coefficients: 1-D array of finite reals. Copied and frozen on construction.

    Attributes:
        coefficients (np.ndarray): read-only coefficient array.
    """
    coefficients: np.ndarray

    def __post_init__(self):
        values = np.array(self.coefficients, dtype=float, copy=True)
        if values.ndim != 1:
            raise ValidationError(f'expected a 1-D coefficient array, got shape {values.shape}', 'coefficients')
        if not np.all(np.isfinite(values)):
            raise ValidationError('coefficients must be finite', 'coefficients')
        values.setflags(write=False)
        object.__setattr__(self, 'coefficients', values)

    @classmethod
    def zeros(cls, size: int) -> StateVector:
        return cls(np.zeros(size))

    @classmethod
    def unit(cls, size: int, mode: int) -> StateVector:
        """
        Basis vector e_mode, with modes counted from 1 like the eigenvalues.
        """
        if not 1 <= mode <= size:
            raise ValidationError(f'mode must be in 1..{size}, got {mode}', 'mode')
        values = np.zeros(size)
        values[mode - 1] = 1.0
        return cls(values)

    @classmethod
    def random(cls, size: int, rng: np.random.Generator, normalize: bool = True) -> StateVector:
        values = rng.standard_normal(size)
        if normalize:
            values /= np.linalg.norm(values)
        return cls(values)

    @property
    def size(self) -> int:
        return self.coefficients.shape[0]

    def norm(self) -> float:
        """X-norm, by Parseval the Euclidean norm of the coefficients."""
        return float(np.linalg.norm(self.coefficients))

    def graph_norm(self, op: SpectralOperator) -> float:
        """(||x||^2 + ||Ax||^2)^(1/2)."""
        self._check(op)
        return float(np.sqrt(np.sum(self.coefficients ** 2 * (1.0 + op.eigenvalues ** 2))))

    def extrapolation_norm(self, op: SpectralOperator, mu: Optional[float] = None) -> float:
        """
        Norm of the extrapolation space X_{-1}, ||x||_{-1} = ||R(mu, A) x||.

        Args:
            op: operator whose extrapolation space is meant.
            mu: resolvent point, defaults to op.resolvent_point.

        Returns:
            (sum_k x_k^2 / (mu + lambda_k)^2)^(1/2)
        """
        self._check(op)
        mu = op.resolvent_point if mu is None else mu
        return op.resolvent_apply(mu, self).norm()

    def pad(self, size: int) -> StateVector:
        """Embeds the coefficients into a basis of `size` modes (zeros appended)."""
        if size < self.size:
            raise ValidationError(f'cannot pad {self.size} coefficients down to {size}', 'size')
        values = np.zeros(size)
        values[:self.size] = self.coefficients
        return StateVector(values)

    def synthesize(self, op: SpectralOperator, x) -> np.ndarray:
        """Evaluates the represented function at the points x of [0, 1]."""
        self._check(op)
        return op.basis(x) @ self.coefficients

    def _check(self, op: SpectralOperator):
        if op.mode_count != self.size:
            raise ValidationError(f'state has {self.size} modes, operator has {op.mode_count}', 'x')

    def __add__(self, other: StateVector) -> StateVector:
        return StateVector(self.coefficients + other.coefficients)

    def __sub__(self, other: StateVector) -> StateVector:
        return StateVector(self.coefficients - other.coefficients)

    def __mul__(self, scalar: float) -> StateVector:
        return StateVector(scalar * self.coefficients)

    __rmul__ = __mul__

    def __neg__(self) -> StateVector:
        return StateVector(-self.coefficients)

    def __repr__(self):
        return f'StateVector(size={self.size}, norm={self.norm():.6g})'


@dataclass(frozen=True, eq=False)
class SpectralOperator:
    """Diagonal model of the generator A = Laplacian on (0, 1) truncated to its first N eigenmodes.

    The eigenvalues stored are those of -A, so A acts as multiplication by -eigenvalues.
    Use the dirichlet() and neumann() constructors rather than building one by hand.

    Args:
        boundary_kind: DIRICHLET or NEUMANN.
        mode_count: N, number of retained modes.
        shift: mu_0 added to every eigenvalue. Must be 0 for Dirichlet and > 0 for Neumann,
            so that 0 lies in the resolvent set.
        resolvent_point: mu used by the extrapolation norm ||x||_{-1} = ||R(mu, A)x||.

    Attributes:
        eigenvalues (np.ndarray): lambda_1 < ... < lambda_N, all positive.
    """
    boundary_kind: BoundaryKind
    mode_count: int
    shift: float = 0.0
    resolvent_point: float = 0.0
    eigenvalues: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        kind = BoundaryKind(self.boundary_kind)
        object.__setattr__(self, 'boundary_kind', kind)
        if isinstance(self.mode_count, bool) or not isinstance(self.mode_count, (int, np.integer)) \
                or self.mode_count < 1:
            raise ValidationError(f'must be a positive integer, got {self.mode_count!r}', 'mode_count')
        object.__setattr__(self, 'mode_count', int(self.mode_count))
        modes = np.arange(1, self.mode_count + 1, dtype=float)
        if kind is BoundaryKind.DIRICHLET:
            if self.shift != 0.0:
                raise ValidationError('the Dirichlet Laplacian takes no shift', 'shift')
            eigenvalues = (modes * np.pi) ** 2
        else:
            if not self.shift > 0.0:
                raise ValidationError('the Neumann Laplacian needs a positive shift so that 0 is in the '
                                      'resolvent set', 'shift')
            eigenvalues = ((modes - 1.0) * np.pi) ** 2 + self.shift
        eigenvalues.setflags(write=False)
        object.__setattr__(self, 'eigenvalues', eigenvalues)
        if self.resolvent_point + eigenvalues[0] <= 0.0:
            raise ValidationError(f'must exceed {-eigenvalues[0]!r}', 'resolvent_point')
        logger.debug('built %s operator with %d modes, lambda_1=%.6g', kind.value, self.mode_count,
                     eigenvalues[0])

    @classmethod
    def dirichlet(cls, mode_count: int, resolvent_point: float = 0.0) -> SpectralOperator:
        return cls(BoundaryKind.DIRICHLET, mode_count, 0.0, resolvent_point)

    @classmethod
    def neumann(cls, mode_count: int, shift: float = 1.0, resolvent_point: float = 0.0) -> SpectralOperator:
        return cls(BoundaryKind.NEUMANN, mode_count, shift, resolvent_point)

    def refine(self) -> SpectralOperator:
        """Same operator with twice as many modes, for N -> 2N convergence studies."""
        return SpectralOperator(self.boundary_kind, 2 * self.mode_count, self.shift, self.resolvent_point)

    def growth_bound(self) -> float:
        """omega_0(A) = -lambda_1."""
        return -float(self.eigenvalues[0])

    def basis(self, x) -> np.ndarray:
        """
        Evaluates the orthonormal eigenfunctions.

        Args:
            x: points of [0, 1], scalar or 1-D.

        Returns:
            Array of shape (len(x), N); column k-1 is the k-th eigenfunction.
        """
        x = np.atleast_1d(np.asarray(x, dtype=float))
        modes = np.arange(1, self.mode_count + 1)
        if self.boundary_kind is BoundaryKind.DIRICHLET:
            return np.sqrt(2.0) * np.sin(np.pi * np.outer(x, modes))
        values = np.sqrt(2.0) * np.cos(np.pi * np.outer(x, modes - 1))
        values[:, 0] = 1.0
        return values

    def semigroup_factors(self, t: float) -> np.ndarray:
        """Diagonal of T(t), e^{-lambda_k t}."""
        if not t >= 0.0:
            raise ValidationError(f'time must be nonnegative, got {t!r}', 't')
        return np.exp(-self.eigenvalues * t)

    def fractional_powers(self, alpha: float) -> np.ndarray:
        """Diagonal of (-A)^alpha, lambda_k^alpha."""
        if not 0.0 < alpha <= 1.0:
            raise ValidationError(f'fractional power must lie in (0, 1], got {alpha!r}', 'alpha')
        return self.eigenvalues ** alpha

    def resolvent_factors(self, lam: float) -> np.ndarray:
        """Diagonal of R(lam, A) = (lam - A)^{-1}, 1 / (lam + lambda_k)."""
        denominators = lam + self.eigenvalues
        hit = np.abs(denominators) <= 1e-12 * np.maximum(1.0, self.eigenvalues)
        if np.any(hit):
            raise SpectralPointError(lam, float(self.eigenvalues[np.argmax(hit)]))
        return 1.0 / denominators

    def semigroup_apply(self, t: float, x: StateVector) -> StateVector:
        """
        T(t)x for the analytic contraction semigroup generated by A.

        Args:
            t: nonnegative time.
            x: state.

        Returns:
            State with coefficients e^{-lambda_k t} x_k.
        """
        x._check(self)
        return StateVector(self.semigroup_factors(t) * x.coefficients)

    def resolvent_apply(self, lam: float, x: StateVector) -> StateVector:
        """
        R(lam, A)x. Raises SpectralPointError when lam + lambda_k = 0 for some k.
        """
        x._check(self)
        return StateVector(self.resolvent_factors(lam) * x.coefficients)

    def fractional_power_apply(self, alpha: float, x: StateVector) -> StateVector:
        """
        (-A)^alpha x for alpha in (0, 1]; alpha = 1 gives -Ax.
        """
        x._check(self)
        return StateVector(self.fractional_powers(alpha) * x.coefficients)

    def generator_apply(self, x: StateVector) -> StateVector:
        x._check(self)
        return StateVector(-self.eigenvalues * x.coefficients)

    def resolvent_norm(self, mu: Optional[float] = None) -> float:
        """||R(mu, A)|| = 1 / (mu + lambda_1) for mu > -lambda_1."""
        mu = self.resolvent_point if mu is None else mu
        return float(np.max(np.abs(self.resolvent_factors(mu))))


def miyadera_resolvent_bound(op: SpectralOperator, scale: float, alpha: float) -> float:
    """
    sup over lam > 0 of ||sqrt(lam) P R(lam, A)|| for the diagonal perturbation P = scale * (-A)^alpha.

    For one mode sqrt(lam) / (lam + lambda_k) peaks at lam = lambda_k with value 1 / (2 sqrt(lambda_k)),
    so the supremum is |scale| * max_k lambda_k^(alpha - 1/2) / 2. It stays bounded as N grows
    exactly when alpha <= 1/2, which is what makes P admissible for A.

    Args:
        op: the unperturbed operator.
        scale: epsilon in P = epsilon (-A)^alpha.
        alpha: power in (0, 1].

    Returns:
        The bound M.
    """
    powers = op.fractional_powers(alpha)
    return float(abs(scale) * np.max(powers / (2.0 * np.sqrt(op.eigenvalues))))
