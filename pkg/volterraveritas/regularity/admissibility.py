from __future__ import annotations
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence
import logging
import math

import numpy as np
from scipy import integrate

from volterraveritas.bergman.bergman_space import INEQUALITY_SLACK, SectorSpec, bergman_norm
from volterraveritas.kernels.memory_kernel import MemoryKernel
from volterraveritas.spectral.spectral_operator import SpectralOperator, StateVector
from volterraveritas.utils.errors import ValidationError
from volterraveritas.utils.utils import is_finite_number

logger = logging.getLogger(__name__)


class ObservationKind(str, Enum):
    FRAC_POWER = 'frac_power'
    BOUNDED = 'bounded'


@dataclass(frozen=True, eq=False)
class ObservationOperator:
    """Observation operator C, either (-A)^power or a bounded map into R^r given by a (r, N) matrix.

    Use the frac_power() and bounded() constructors.
    """
    kind: ObservationKind
    power: float = 0.5
    matrix: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, 'kind', ObservationKind(self.kind))
        if self.kind is ObservationKind.FRAC_POWER:
            if not is_finite_number(self.power) or not 0.0 < self.power <= 1.0:
                raise ValidationError(f'must lie in (0, 1], got {self.power!r}', 'power')
        else:
            matrix = np.atleast_2d(np.array(self.matrix, dtype=float))
            if matrix.ndim != 2 or not np.all(np.isfinite(matrix)):
                raise ValidationError('bounded observation needs a finite 2-D matrix', 'matrix')
            matrix.setflags(write=False)
            object.__setattr__(self, 'matrix', matrix)

    @classmethod
    def frac_power(cls, power: float) -> ObservationOperator:
        return cls(ObservationKind.FRAC_POWER, power)

    @classmethod
    def bounded(cls, matrix) -> ObservationOperator:
        return cls(ObservationKind.BOUNDED, matrix=matrix)

    @property
    def tag(self) -> str:
        if self.kind is ObservationKind.FRAC_POWER:
            return f'frac_power({self.power!r})'
        return f'bounded({self.matrix.shape[0]}x{self.matrix.shape[1]})'

    def outputs(self, op: SpectralOperator, t: float, x: np.ndarray) -> np.ndarray:
        """C T(t) x for coefficient vector x."""
        evolved = op.semigroup_factors(t) * x
        if self.kind is ObservationKind.FRAC_POWER:
            return op.fractional_powers(self.power) * evolved
        return self.matrix @ evolved

    def gramian(self, op: SpectralOperator, window: float) -> np.ndarray:
        """
        Observability Gramian W = integral_0^window T(t)* C* C T(t) dt, so that the p = 2 output energy
        of x is x^T W x.
        """
        self._check(op)
        sums = op.eigenvalues[:, None] + op.eigenvalues[None, :]
        decay = -np.expm1(-sums * window) / sums
        if self.kind is ObservationKind.FRAC_POWER:
            return np.diag(op.fractional_powers(self.power) ** 2 * np.diag(decay))
        return (self.matrix.T @ self.matrix) * decay

    def energy(self, op: SpectralOperator, x: np.ndarray, p: float, window: float) -> float:
        """integral_0^window ||C T(t) x||^p dt; exact for p = 2, adaptive quadrature otherwise."""
        self._check(op)
        if p == 2.0:
            if self.kind is ObservationKind.FRAC_POWER:
                powers = op.fractional_powers(self.power)
                weights = powers ** 2 * -np.expm1(-2.0 * op.eigenvalues * window) / (2.0 * op.eigenvalues)
                return float(np.sum(weights * x * x))
            return float(x @ self.gramian(op, window) @ x)

        def integrand(t):
            return float(np.linalg.norm(self.outputs(op, t, x))) ** p

        if math.isinf(window):
            value, _ = integrate.quad(integrand, 0.0, np.inf, limit=400)
            return value
        # breakpoints at the mode time scales 1 / lambda_k that fall inside the window
        scales = 1.0 / op.eigenvalues
        points = sorted(set(float(s) for s in scales if s < window))[:200]
        value, _ = integrate.quad(integrand, 0.0, window, points=points or None, limit=max(200, 4 * len(points)))
        return value

    def _check(self, op: SpectralOperator):
        if self.kind is ObservationKind.BOUNDED and self.matrix.shape[1] != op.mode_count:
            raise ValidationError(f'matrix has {self.matrix.shape[1]} columns, operator has {op.mode_count} modes',
                                  'matrix')


@dataclass(frozen=True)
class AdmissibilityReport:
    """Estimated admissibility constant gamma(window) of an observation operator.

    Attributes:
        p: time exponent.
        window: length of the observation window.
        operator: tag of C.
        estimate: gamma_hat, largest (energy)^(1/p) / ||x|| over the probes.
        direction: probe attaining it.
        sample_count: number of probes.
        closed_form: exact sup for p = 2 (Gramian spectral norm), NaN otherwise.
    """
    p: float
    window: float
    operator: str
    estimate: float
    direction: np.ndarray
    sample_count: int
    closed_form: float

    def row(self) -> dict:
        return {'p': self.p, 'window': self.window, 'operator': self.operator, 'estimate': self.estimate,
                'closed_form': self.closed_form, 'sample_count': self.sample_count}


def admissibility_constant(op: SpectralOperator, obs: ObservationOperator, p: float, window: float,
                           random_probes: int = 32, seed: int = 0,
                           extra_probes: Sequence[np.ndarray] = ()) -> AdmissibilityReport:
    """
    Estimates gamma in integral_0^window ||C T(t) x||^p dt <= gamma^p ||x||^p.

    Probes are the basis vectors, `random_probes` seeded random unit vectors, any extra_probes, and for
    p = 2 the top eigenvector of the observability Gramian, which makes the estimate the exact supremum.
    The random probes depend only on `seed`, so estimates for different windows share the probe set and
    are non-decreasing in the window.

    Args:
        op: operator A.
        obs: observation operator C.
        p: exponent > 1.
        window: observation window > 0, may be math.inf for frac_power observations.
        random_probes: number of random unit probes.
        seed: seed of the random probes.
        extra_probes: further coefficient vectors to include.

    Returns:
        AdmissibilityReport.
    """
    if not is_finite_number(p) or p <= 1.0:
        raise ValidationError(f'must be > 1, got {p!r}', 'p')
    if not window > 0.0:
        raise ValidationError(f'must be > 0, got {window!r}', 'window')
    if math.isinf(window) and obs.kind is ObservationKind.BOUNDED:
        raise ValidationError('bounded observations need a finite window', 'window')
    modes = op.mode_count
    rng = np.random.default_rng(seed)
    probes: List[np.ndarray] = [StateVector.unit(modes, k).coefficients for k in range(1, modes + 1)]
    probes += [StateVector.random(modes, rng).coefficients for _ in range(random_probes)]
    probes += [np.asarray(x, dtype=float) for x in extra_probes]
    closed_form = math.nan
    if p == 2.0:
        values, vectors = np.linalg.eigh(obs.gramian(op, window))
        closed_form = math.sqrt(max(float(values[-1]), 0.0))
        probes.append(vectors[:, -1])

    best, direction = 0.0, probes[0]
    for x in probes:
        size = float(np.linalg.norm(x))
        if size == 0.0:
            continue
        value = obs.energy(op, x, p, window) ** (1.0 / p) / size
        if value > best:
            best, direction = value, x
    logger.debug('admissibility of %s: p=%.3g window=%.3g gamma=%.6g over %d probes', obs.tag, p, window, best,
                 len(probes))
    return AdmissibilityReport(p, window, obs.tag, best, np.array(direction), len(probes), closed_form)


@dataclass(frozen=True)
class PerturbationProbe:
    """One (x, f) probe of the product-space admissibility estimate."""
    sample: int
    lhs: float
    rhs: float

    @property
    def satisfied(self) -> bool:
        return bool(self.lhs <= self.rhs * (1.0 + INEQUALITY_SLACK))

    def row(self) -> dict:
        return {'sample': self.sample, 'lhs': self.lhs, 'rhs': self.rhs, 'satisfied': self.satisfied}


@dataclass(frozen=True)
class PerturbationReport:
    p: float
    window: float
    kernel_norm: float
    gamma: float
    probes: List[PerturbationProbe]

    @property
    def violations(self) -> int:
        return sum(not probe.satisfied for probe in self.probes)

    @property
    def bound(self) -> float:
        """Largest right-hand side over the probes."""
        return max((probe.rhs for probe in self.probes), default=0.0)

    @property
    def max_ratio(self) -> float:
        ratios = [probe.lhs / probe.rhs for probe in self.probes if probe.rhs > 0.0]
        return max(ratios, default=0.0)


def _product_lhs(op: SpectralOperator, observation: ObservationOperator, kernel_norm: float, x: np.ndarray,
                 history: MemoryKernel, direction: np.ndarray, p: float, window: float) -> float:
    """integral_0^window (||f(t)|| + ||a||_B ||F T(t) x||)^p dt for f(z) = history(z) * direction."""
    size = float(np.linalg.norm(direction))

    def integrand(t):
        observed = float(np.linalg.norm(observation.outputs(op, t, x)))
        return (abs(history.on_halfline(t)) * size + kernel_norm * observed) ** p

    points = sorted(float(s) for s in 1.0 / op.eigenvalues if s < window)[:200]
    value, _ = integrate.quad(integrand, 0.0, window, points=points or None, limit=max(200, 4 * len(points)))
    return value


def perturbation_admissibility_bound(kernel: MemoryKernel, op: SpectralOperator, alpha_pow: float, p: float,
                                     q: float, theta: float, window: float, probe_count: int = 100,
                                     seed: int = 0) -> PerturbationReport:
    """
    Checks the admissibility estimate of the coupling operator on the product space X x B^q_theta.

    Its semigroup orbit observed at (x, f) is (f(t), a(.) F T(t) x), whose norm is
    ||f(t)|| + ||a||_B ||F T(t) x||. Each probe draws a unit x and an X-valued Bergman function
    f(z) = b(z) v with b a random exponential kernel, then compares

        lhs = integral_0^window (||f(t)|| + ||a||_B ||F T(t) x||)^p dt
        rhs = 2^{p-1} (||a||_B^p gamma^p ||x||^p + integral_0^window ||f(t)||^p dt)

    with gamma the admissibility constant of F = (-A)^alpha_pow over the window. x = 0 and f = 0 are
    among the probes.

    Returns:
        PerturbationReport with one PerturbationProbe per (x, f).
    """
    if not 0.0 < theta < math.pi / 2:
        raise ValidationError(f'the kernel norm needs theta in (0, pi/2), got {theta!r}', 'theta')
    if not is_finite_number(window) or window <= 0.0:
        raise ValidationError(f'must be a finite number > 0, got {window!r}', 'window')
    kernel_norm = bergman_norm(kernel, SectorSpec(theta, q))
    observation = ObservationOperator.frac_power(alpha_pow)
    rng = np.random.default_rng(seed)
    modes = op.mode_count
    pairs = [(np.zeros(modes), MemoryKernel.exponential(1.0, 1.0), StateVector.unit(modes, 1).coefficients),
             (StateVector.unit(modes, 1).coefficients, MemoryKernel.exponential(0.0, 1.0), np.zeros(modes))]
    while len(pairs) < probe_count:
        history = MemoryKernel.exponential(float(rng.uniform(0.1, 2.0)), float(rng.uniform(0.5, 5.0)))
        pairs.append((StateVector.random(modes, rng).coefficients, history, rng.standard_normal(modes)))
    gamma = admissibility_constant(op, observation, p, window, seed=seed,
                                   extra_probes=[x for x, _, _ in pairs]).estimate

    probes = []
    for sample, (x, history, direction) in enumerate(pairs[:probe_count]):
        lhs = _product_lhs(op, observation, kernel_norm, x, history, direction, p, window)
        forcing_energy = history.lp_halfline_norm(p, window) ** p * float(np.linalg.norm(direction)) ** p
        rhs = 2.0 ** (p - 1.0) * (kernel_norm ** p * gamma ** p * float(np.linalg.norm(x)) ** p + forcing_energy)
        probes.append(PerturbationProbe(sample, lhs, rhs))
    report = PerturbationReport(p, window, kernel_norm, gamma, probes)
    if report.violations:
        logger.warning('%d of %d product-space probes violate the estimate', report.violations, len(probes))
    return report
