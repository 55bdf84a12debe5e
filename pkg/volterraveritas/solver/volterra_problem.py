from __future__ import annotations
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional
import logging
import math

import numpy as np

from volterraveritas.kernels.memory_kernel import MemoryKernel
from volterraveritas.spectral.spectral_operator import SpectralOperator, StateVector
from volterraveritas.utils.errors import ValidationError
from volterraveritas.utils.utils import is_finite_number

logger = logging.getLogger(__name__)

"""
Problem description for the Volterra equation

    z'(t) = A z(t) + P z(t) + integral_0^t a(t - s) (-A)^alpha z(s) ds + f(t),    z(0) = 0,

on a uniform time grid, and the Trajectory the solvers hand back. P = eps (-A)^alpha_P is an optional
interior perturbation and is zero unless asked for.
"""


@dataclass(frozen=True, eq=False)
class Forcing:
    """Forcing f(t) = sum_h spatial[h] * cos(2 pi frequencies[h] t + phases[h]).

    Every builder below produces a finite sum of this shape, which keeps f smooth, cheap to sample at
    grid points and midpoints, and closed under addition and scaling.

    Args:
        spatial: (H, N) array of eigen-coefficients, one row per temporal harmonic.
        frequencies: (H,) array of temporal frequencies.
        phases: (H,) array of phase shifts.
        label: short description used in logs and CSV metadata.
    """
    spatial: np.ndarray
    frequencies: np.ndarray
    phases: np.ndarray
    label: str = 'custom'

    def __post_init__(self):
        spatial = np.atleast_2d(np.array(self.spatial, dtype=float))
        frequencies = np.atleast_1d(np.array(self.frequencies, dtype=float))
        phases = np.atleast_1d(np.array(self.phases, dtype=float))
        if spatial.ndim != 2 or frequencies.shape != (spatial.shape[0],) or phases.shape != frequencies.shape:
            raise ValidationError(f'inconsistent shapes {spatial.shape}, {frequencies.shape}, {phases.shape}',
                                  'forcing')
        if not (np.all(np.isfinite(spatial)) and np.all(np.isfinite(frequencies)) and np.all(np.isfinite(phases))):
            raise ValidationError('forcing must be finite everywhere', 'forcing')
        for name, value in (('spatial', spatial), ('frequencies', frequencies), ('phases', phases)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @classmethod
    def zero(cls, size: int) -> Forcing:
        return cls(np.zeros((1, size)), [0.0], [0.0], 'zero')

    @classmethod
    def constant(cls, size: int, mode: int = 1, amplitude: float = 1.0) -> Forcing:
        """f(t) = amplitude * e_mode."""
        return cls(amplitude * StateVector.unit(size, mode).coefficients[None, :], [0.0], [0.0],
                   f'const(mode={mode})')

    @classmethod
    def single_mode(cls, size: int, mode: int = 1, frequency: float = 1.0, amplitude: float = 1.0) -> Forcing:
        """f(t) = amplitude * cos(2 pi frequency t) * e_mode."""
        return cls(amplitude * StateVector.unit(size, mode).coefficients[None, :], [frequency], [0.0],
                   f'single-mode(mode={mode},freq={frequency!r})')

    @classmethod
    def random(cls, size: int, rng: np.random.Generator, bandwidth: Optional[int] = None,
               harmonics: int = 3) -> Forcing:
        """
        Seeded band-limited Gaussian forcing.

        Args:
            size: number of modes N of the target operator.
            rng: numpy Generator, e.g. numpy.random.default_rng(seed).
            bandwidth: highest excited mode, defaults to max(1, N // 2).
            harmonics: number of temporal harmonics cos(pi h t), h = 0..harmonics-1.

        Returns:
            Forcing whose spatial coefficients vanish above the bandwidth.
        """
        bandwidth = max(1, size // 2) if bandwidth is None else bandwidth
        if not 1 <= bandwidth <= size:
            raise ValidationError(f'must lie in 1..{size}, got {bandwidth}', 'bandwidth')
        spatial = np.zeros((harmonics, size))
        spatial[:, :bandwidth] = rng.standard_normal((harmonics, bandwidth)) / math.sqrt(harmonics * bandwidth)
        frequencies = 0.5 * np.arange(harmonics)
        return cls(spatial, frequencies, np.zeros(harmonics), f'random(bandwidth={bandwidth})')

    @property
    def size(self) -> int:
        return self.spatial.shape[1]

    def sample(self, times) -> np.ndarray:
        """Coefficients f(t) for every t in `times`, shape (len(times), N)."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        temporal = np.cos(2.0 * np.pi * np.outer(times, self.frequencies) + self.phases[None, :])
        return temporal @ self.spatial

    def __call__(self, t: float) -> StateVector:
        return StateVector(self.sample([t])[0])

    def pad(self, size: int) -> Forcing:
        if size < self.size:
            raise ValidationError(f'cannot pad a forcing on {self.size} modes down to {size}', 'size')
        spatial = np.zeros((self.spatial.shape[0], size))
        spatial[:, :self.size] = self.spatial
        return Forcing(spatial, self.frequencies, self.phases, self.label)

    def __add__(self, other: Forcing) -> Forcing:
        if other.size != self.size:
            raise ValidationError(f'cannot add forcings on {self.size} and {other.size} modes', 'forcing')
        return Forcing(np.vstack([self.spatial, other.spatial]),
                       np.concatenate([self.frequencies, other.frequencies]),
                       np.concatenate([self.phases, other.phases]),
                       f'{self.label}+{other.label}')

    def __mul__(self, scalar: float) -> Forcing:
        return Forcing(scalar * self.spatial, self.frequencies, self.phases, self.label)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class VolterraProblem:
    """Everything a solver needs for one run.

    Args:
        op: spectral model of A.
        alpha: power of F = (-A)^alpha in the memory term, in (0, 1/2].
        kernel: memory kernel a.
        forcing: right-hand side f.
        horizon: final time T > 0.
        step: time step dt, must divide T.
        perturbation_scale: eps of the interior perturbation P = eps (-A)^perturbation_power.
        perturbation_power: alpha_P in (0, 1/2].
        initial: initial state. Only the zero state is accepted.

    Attributes:
        step_count (int): M = T / dt.
    """
    op: SpectralOperator
    alpha: float
    kernel: MemoryKernel
    forcing: Forcing
    horizon: float = 1.0
    step: float = 1e-3
    perturbation_scale: float = 0.0
    perturbation_power: float = 0.5
    initial: Optional[StateVector] = None
    step_count: int = field(init=False)

    def __post_init__(self):
        if not is_finite_number(self.alpha) or not 0.0 < self.alpha <= 0.5:
            raise ValidationError(f'must lie in (0, 1/2], got {self.alpha!r}', 'alpha')
        if not is_finite_number(self.horizon) or self.horizon <= 0.0:
            raise ValidationError(f'must be > 0, got {self.horizon!r}', 'T')
        if not is_finite_number(self.step) or self.step <= 0.0:
            raise ValidationError(f'must be > 0, got {self.step!r}', 'dt')
        count = int(round(self.horizon / self.step))
        if count < 1 or abs(count * self.step - self.horizon) > 1e-9 * self.horizon:
            raise ValidationError(f'T={self.horizon!r} is not a multiple of dt={self.step!r}', 'dt')
        object.__setattr__(self, 'step_count', count)
        if self.forcing.size != self.op.mode_count:
            raise ValidationError(f'forcing has {self.forcing.size} modes, operator has {self.op.mode_count}',
                                  'forcing')
        if not is_finite_number(self.perturbation_scale):
            raise ValidationError(f'must be finite, got {self.perturbation_scale!r}', 'perturbation_scale')
        if not 0.0 < self.perturbation_power <= 0.5:
            raise ValidationError(f'must lie in (0, 1/2], got {self.perturbation_power!r}', 'perturbation_power')
        if self.initial is not None and self.initial.norm() > 0.0:
            raise ValidationError('only zero initial data is supported', 'initial')

    @property
    def times(self) -> np.ndarray:
        return self.step * np.arange(self.step_count + 1)

    @property
    def memory_powers(self) -> np.ndarray:
        """Diagonal of F = (-A)^alpha."""
        return self.op.fractional_powers(self.alpha)

    @property
    def decay_rates(self) -> np.ndarray:
        """Diagonal of -(A + P), lambda_k - eps * lambda_k^alpha_P."""
        rates = self.op.eigenvalues.copy()
        if self.perturbation_scale:
            rates -= self.perturbation_scale * self.op.fractional_powers(self.perturbation_power)
        return rates

    def forcing_samples(self) -> np.ndarray:
        return self.forcing.sample(self.times)

    def forcing_midpoints(self) -> np.ndarray:
        return self.forcing.sample(self.times[:-1] + 0.5 * self.step)

    def with_step(self, step: float) -> VolterraProblem:
        return replace(self, step=step)

    def with_forcing(self, forcing: Forcing) -> VolterraProblem:
        return replace(self, forcing=forcing)

    def refined(self) -> VolterraProblem:
        """Same problem on twice as many modes."""
        op = self.op.refine()
        return replace(self, op=op, forcing=self.forcing.pad(op.mode_count))

    def describe(self) -> Dict:
        return {'modes': self.op.mode_count, 'boundary': self.op.boundary_kind.value, 'alpha': self.alpha,
                'kernel': self.kernel.spec, 'forcing': self.forcing.label, 'T': self.horizon, 'dt': self.step}


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Solution samples on the time grid t_j = j * dt.

    Args:
        times: (M+1,) grid.
        states: (M+1, N) coefficients of z(t_j).
        memory: (M+1, N) coefficients of the memory trace w(t_j) = integral_0^{t_j} a(t_j - s) F z(s) ds.
        derivatives: (M+1, N) coefficients of z'(t_j) = (A + P) z + w + f at t_j.
        generator_values: (M+1, N) coefficients of A z(t_j).
        solver: name of the solver that produced it.
    """
    times: np.ndarray
    states: np.ndarray
    memory: np.ndarray
    derivatives: np.ndarray
    generator_values: np.ndarray
    solver: str = ''

    def __post_init__(self):
        for name in ('times', 'states', 'memory', 'derivatives', 'generator_values'):
            value = np.array(getattr(self, name), dtype=float)
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        if self.states.shape != self.memory.shape or self.states.shape[0] != self.times.shape[0]:
            raise ValidationError(f'trajectory arrays disagree: {self.states.shape}, {self.memory.shape}, '
                                  f'{self.times.shape}', 'trajectory')

    @classmethod
    def assemble(cls, prob: VolterraProblem, states: np.ndarray, memory: np.ndarray, solver: str) -> Trajectory:
        """Fills in z' and Az from the solved states and memory traces."""
        derivatives = -prob.decay_rates * states + memory + prob.forcing_samples()
        return cls(prob.times, states, memory, derivatives, -prob.op.eigenvalues * states, solver)

    @property
    def step_count(self) -> int:
        return self.times.shape[0] - 1

    def state(self, j: int) -> StateVector:
        return StateVector(self.states[j])

    def pointwise_norms(self) -> List[Dict]:
        """Rows t, norm_z, norm_Az, norm_w."""
        norm_z = np.linalg.norm(self.states, axis=1)
        norm_az = np.linalg.norm(self.generator_values, axis=1)
        norm_w = np.linalg.norm(self.memory, axis=1)
        return [{'t': float(t), 'norm_z': float(a), 'norm_Az': float(b), 'norm_w': float(c)}
                for t, a, b, c in zip(self.times, norm_z, norm_az, norm_w)]

    def __add__(self, other: Trajectory) -> Trajectory:
        return Trajectory(self.times, self.states + other.states, self.memory + other.memory,
                          self.derivatives + other.derivatives, self.generator_values + other.generator_values,
                          self.solver)
