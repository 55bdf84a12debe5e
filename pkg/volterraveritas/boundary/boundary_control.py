from __future__ import annotations
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple
import logging
import math

import numpy as np
from numpy.polynomial import Polynomial
from scipy import integrate, linalg

from volterraveritas.regularity.admissibility import ObservationOperator, admissibility_constant
from volterraveritas.regularity.regularity import SampleNorms, lp_time_norm, sample_norms
from volterraveritas.solver.volterra_problem import Trajectory, VolterraProblem
from volterraveritas.spectral.spectral_operator import BoundaryKind, SpectralOperator, StateVector
from volterraveritas.utils.errors import UnsupportedKernelError, ValidationError
from volterraveritas.utils.utils import is_finite_number

logger = logging.getLogger(__name__)

"""
Boundary control of the interval Laplacian at truncation level N.

The boundary space is U = R^2 (values at x = 0 and x = 1) with the Euclidean norm, the trace G maps a function
to its boundary pair, and A is the Dirichlet Laplacian. D_lam inverts G on ker(lam - A_m), B = (lam - A_{-1}) D_lam
is the control operator, and a bounded feedback K z = (<z, k_0>, <z, k_1>) closes the loop G z = K z.
"""

#: Conditions of the closed-loop theory that cannot be decided at truncation level.
CONDITION_H_ASSUMPTIONS = (
    'item 4: 1 lies in the resolvent set of the input-output map, assumed',
    'item 5: the closed-loop system is regular with feedthrough zero, assumed',
)


def _boundary_pair(u) -> np.ndarray:
    values = np.asarray(u, dtype=float).reshape(-1)
    if values.shape != (2,) or not np.all(np.isfinite(values)):
        raise ValidationError(f'expected a finite pair (u0, u1), got {u!r}', 'u')
    return values


def _require_dirichlet(op: SpectralOperator):
    if op.boundary_kind is not BoundaryKind.DIRICHLET:
        raise ValidationError('boundary control is set up on the Dirichlet eigenbasis', 'op')


def control_columns(op: SpectralOperator) -> np.ndarray:
    """
    (N, 2) matrix B_N of the control operator: column j holds the coefficients of B e_j, with
    b_k(u) = sqrt(2) k pi (u0 - (-1)^k u1) independent of lam.
    """
    _require_dirichlet(op)
    modes = np.arange(1, op.mode_count + 1)
    scale = math.sqrt(2.0) * modes * np.pi
    return np.column_stack([scale, -scale * (-1.0) ** modes])


@dataclass(frozen=True, eq=False)
class DirichletMap:
    """Dirichlet operator D_lam: U -> ker(lam - A_m) on the interval.

    Args:
        op: Dirichlet SpectralOperator that fixes the truncation level.
        lam: resolvent point >= 0.
    """
    op: SpectralOperator
    lam: float

    def __post_init__(self):
        _require_dirichlet(self.op)
        if not is_finite_number(self.lam):
            raise ValidationError(f'must be finite, got {self.lam!r}', 'lambda')
        # raises SpectralPointError on an eigenvalue
        self.op.resolvent_factors(self.lam)
        if self.lam < 0.0:
            raise ValidationError(f'must be >= 0, got {self.lam!r}', 'lambda')

    def coefficients(self, u) -> np.ndarray:
        """d_k(lam) = b_k(u) / (lam + (k pi)^2), the sine coefficients of D_lam u."""
        return control_columns(self.op) @ _boundary_pair(u) / (self.lam + self.op.eigenvalues)

    def apply(self, u) -> StateVector:
        return StateVector(self.coefficients(u))

    def evaluate(self, u, x) -> np.ndarray:
        """
        Closed form of D_lam u: u0 + (u1 - u0) x for lam = 0, otherwise
        (u0 sinh(k(1 - x)) + u1 sinh(k x)) / sinh(k) with k = sqrt(lam), written with decaying exponentials.
        """
        u0, u1 = _boundary_pair(u)
        x = np.asarray(x, dtype=float)
        if self.lam == 0.0:
            return u0 + (u1 - u0) * x
        kappa = math.sqrt(self.lam)
        denominator = -np.expm1(-2.0 * kappa)

        def ratio(y):
            # sinh(kappa y) / sinh(kappa)
            return np.exp(-kappa * (1.0 - y)) * -np.expm1(-2.0 * kappa * y) / denominator

        return u0 * ratio(1.0 - x) + u1 * ratio(x)

    def trace(self, u) -> np.ndarray:
        """G D_lam u, the boundary values of the closed form."""
        return self.evaluate(u, np.array([0.0, 1.0]))

    def interior_residual(self, u, points: int = 1001) -> float:
        """max |lam v - v''| over interior grid points, v'' by central second differences."""
        x = np.linspace(0.0, 1.0, points)
        values = self.evaluate(u, x)
        spacing = x[1] - x[0]
        second = (values[2:] - 2.0 * values[1:-1] + values[:-2]) / spacing ** 2
        return float(np.max(np.abs(self.lam * values[1:-1] - second)))

    def coefficients_by_quadrature(self, u) -> np.ndarray:
        """Sine coefficients of the closed form by QAWO quadrature, independent of the table formula."""
        coefficients = np.empty(self.op.mode_count)
        for k in range(1, self.op.mode_count + 1):
            value, _ = integrate.quad(lambda x: self.evaluate(u, x), 0.0, 1.0, weight='sin', wvar=k * np.pi,
                                      epsabs=1e-13, limit=200)
            coefficients[k - 1] = math.sqrt(2.0) * value
        return coefficients


def dirichlet_map(op: SpectralOperator, lam: float, u) -> StateVector:
    """Coefficients of D_lam u in the eigenbasis of op."""
    return DirichletMap(op, lam).apply(u)


def control_apply(op: SpectralOperator, lam: float, u) -> StateVector:
    """
    Bu = (lam - A_{-1}) D_lam u in X_{-1}, coefficients (lam + lambda_k) d_k(lam).

    The result does not depend on lam; compare two lam in the X_{-1} norm to see it.
    """
    table = DirichletMap(op, lam)
    return StateVector((lam + op.eigenvalues) * table.coefficients(u))


def control_growth_scan(u, sizes: Sequence[int]) -> List[dict]:
    """||Bu||_X and ||Bu||_{-1} for growing truncation levels; the first grows without bound."""
    rows = []
    for size in sizes:
        op = SpectralOperator.dirichlet(size)
        image = control_apply(op, 0.0, u)
        rows.append({'modes': size, 'norm_X': image.norm(), 'norm_extrapolated': image.extrapolation_norm(op)})
        logger.info('B u at N=%d: ||.||_X=%.6g ||.||_-1=%.6g', size, rows[-1]['norm_X'],
                    rows[-1]['norm_extrapolated'])
    return rows


@dataclass(frozen=True, eq=False)
class BoundaryPath:
    """U-valued polynomial path u(s) = (first(s), second(s)) with u(0) = u'(0) = 0.

    Args:
        first: polynomial coefficients of the x = 0 component, lowest degree first.
        second: same for the x = 1 component.
    """
    first: Polynomial
    second: Polynomial

    def __post_init__(self):
        for name in ('first', 'second'):
            component = getattr(self, name)
            if not isinstance(component, Polynomial):
                component = Polynomial(np.asarray(component, dtype=float))
                object.__setattr__(self, name, component)
            if abs(component(0.0)) > 0.0 or abs(component.deriv()(0.0)) > 0.0:
                raise ValidationError('boundary paths must satisfy u(0) = u\'(0) = 0', name)

    @classmethod
    def monomial(cls, power: int, first: float = 1.0, second: float = 0.0) -> BoundaryPath:
        """(first * s^power, second * s^power)."""
        coefficients = np.zeros(power + 1)
        coefficients[power] = 1.0
        return cls(Polynomial(first * coefficients), Polynomial(second * coefficients))

    @classmethod
    def random(cls, rng: np.random.Generator, degree: int = 4) -> BoundaryPath:
        """Gaussian coefficients on s^2 .. s^degree."""
        if degree < 2:
            raise ValidationError(f'must be >= 2, got {degree}', 'degree')
        draws = np.zeros((2, degree + 1))
        draws[:, 2:] = rng.standard_normal((2, degree - 1))
        return cls(Polynomial(draws[0]), Polynomial(draws[1]))

    def value(self, s) -> np.ndarray:
        """u(s), shape (..., 2)."""
        s = np.asarray(s, dtype=float)
        return np.stack([self.first(s), self.second(s)], axis=-1)

    def derivative(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        return np.stack([self.first.deriv()(s), self.second.deriv()(s)], axis=-1)

    def l2_norm(self, t: float) -> float:
        """||u||_{L^2(0, t; U)}, exact."""
        squared = (self.first ** 2 + self.second ** 2).integ()
        return math.sqrt(max(float(squared(t) - squared(0.0)), 0.0))


def _check_time(t: float):
    if not is_finite_number(t) or t < 0.0:
        raise ValidationError(f'must be >= 0, got {t!r}', 't')


def input_map(op: SpectralOperator, path: BoundaryPath, t: float, form: str = 'parts',
              tol: float = 1e-11) -> StateVector:
    """
    Input map Phi_t u = integral_0^t T_{-1}(t - s) B u(s) ds.

    form='parts' evaluates D_0 u(t) - integral_0^t T(t - s) D_0 u'(s) ds, which only involves X-valued terms;
    form='convolution' integrates the extrapolated convolution coefficientwise. Both use adaptive vector
    quadrature, since the high modes e^{-lambda_k (t - s)} live on short time scales near s = t.
    """
    _require_dirichlet(op)
    _check_time(t)
    if not isinstance(path, BoundaryPath):
        raise ValidationError('expected a BoundaryPath', 'u')
    if t == 0.0:
        return StateVector.zeros(op.mode_count)
    eigenvalues = op.eigenvalues
    if form == 'parts':
        lifting = DirichletMap(op, 0.0)
        columns = control_columns(op) / eigenvalues[:, None]

        def integrand(s):
            return np.exp(-eigenvalues * (t - s)) * (columns @ path.derivative(s))

        convolution, _ = integrate.quad_vec(integrand, 0.0, t, epsabs=tol, epsrel=tol, norm='max', limit=2000)
        return StateVector(lifting.coefficients(path.value(t)) - convolution)
    if form == 'convolution':
        columns = control_columns(op)

        def integrand(s):
            return np.exp(-eigenvalues * (t - s)) * (columns @ path.value(s))

        convolution, _ = integrate.quad_vec(integrand, 0.0, t, epsabs=tol, epsrel=tol, norm='max', limit=2000)
        return StateVector(convolution)
    raise ValidationError(f"expected 'parts' or 'convolution', got {form!r}", 'form')


def input_map_samples(op: SpectralOperator, path: BoundaryPath, times: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Phi_t u for every t in `times` from one vector quadrature, shape (len(times), N)."""
    _require_dirichlet(op)
    times = np.asarray(times, dtype=float)
    columns = control_columns(op)
    eigenvalues = op.eigenvalues

    def integrand(s):
        active = (times >= s)[:, None]
        lag = np.maximum(times - s, 0.0)[:, None]
        return np.where(active, np.exp(-eigenvalues[None, :] * lag), 0.0) * (columns @ path.value(s))[None, :]

    inner = sorted(float(t) for t in times if 0.0 < t < times.max())
    result, _ = integrate.quad_vec(integrand, 0.0, float(times.max()), epsabs=tol, epsrel=tol, norm='max',
                                   limit=4000, points=inner or None)
    return result


def input_map_constant(op: SpectralOperator, paths: Sequence[BoundaryPath], t: float) -> float:
    """Empirical admissibility constant max ||Phi_t u||_X / ||u||_{L^2(0, t)} over the paths."""
    _check_time(t)
    best = 0.0
    for path in paths:
        size = path.l2_norm(t)
        if size > 0.0:
            best = max(best, input_map(op, path, t).norm() / size)
    return best


def feedback_representers(mode_count: int, knorm: float, seed: int) -> np.ndarray:
    """
    Two smooth seeded representers k_0, k_1 (coefficients decaying like k^{-2}) stacked into the (2, N) matrix of
    K z = (<z, k_0>, <z, k_1>), scaled so that ||K|| = knorm.
    """
    if not is_finite_number(knorm) or knorm < 0.0:
        raise ValidationError(f'must be >= 0, got {knorm!r}', 'knorm')
    rng = np.random.default_rng(seed)
    modes = np.arange(1, mode_count + 1)
    matrix = rng.standard_normal((2, mode_count)) / modes ** 2
    size = float(np.linalg.norm(matrix, 2))
    if knorm == 0.0 or size == 0.0:
        return np.zeros((2, mode_count))
    return matrix * (knorm / size)


@dataclass(frozen=True, eq=False)
class BoundarySystem:
    """Volterra equation with the boundary condition G z = K z.

    Args:
        problem: interior data (Dirichlet operator, alpha, exponential kernel, forcing, grid).
        representers: (2, N) matrix of K.

    Attributes:
        generator (np.ndarray): A_N + B_N K_N, the perturbed generator at truncation level N.
    """
    problem: VolterraProblem
    representers: np.ndarray
    generator: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        _require_dirichlet(self.problem.op)
        matrix = np.atleast_2d(np.array(self.representers, dtype=float))
        if matrix.shape != (2, self.problem.op.mode_count) or not np.all(np.isfinite(matrix)):
            raise ValidationError(f'expected a finite (2, {self.problem.op.mode_count}) matrix, got {matrix.shape}',
                                  'representers')
        if self.problem.perturbation_scale:
            raise ValidationError('the boundary system takes no interior perturbation', 'perturbation_scale')
        matrix.setflags(write=False)
        object.__setattr__(self, 'representers', matrix)
        generator = -np.diag(self.problem.op.eigenvalues) + control_columns(self.problem.op) @ matrix
        generator.setflags(write=False)
        object.__setattr__(self, 'generator', generator)

    @property
    def feedback_norm(self) -> float:
        return float(np.linalg.norm(self.representers, 2))

    def feedback(self, states: np.ndarray) -> np.ndarray:
        """K z for rows of coefficients, the boundary values G z of the closed loop."""
        return np.asarray(states) @ self.representers.T

    def spectral_abscissa(self) -> float:
        return float(np.max(np.linalg.eigvals(self.generator).real))

    def numerical_abscissa(self) -> float:
        """Largest eigenvalue of the symmetric part; <= omega means dissipative up to the shift omega."""
        return float(np.max(np.linalg.eigvalsh(0.5 * (self.generator + self.generator.T))))

    def refined(self) -> BoundarySystem:
        """Same K on twice as many modes (representers padded with zeros)."""
        problem = self.problem.refined()
        padded = np.zeros((2, problem.op.mode_count))
        padded[:, :self.representers.shape[1]] = self.representers
        return BoundarySystem(problem, padded)


def solve_boundary_volterra(system: BoundarySystem) -> Trajectory:
    """
    Solves z' = (A_N + B_N K_N) z + w + f, w' = beta F z - gamma w with z(0) = w(0) = 0.

    The dense 2N system is propagated exactly step by step with the forcing frozen at midpoints, the same
    scheme solve_augmented uses mode by mode. In the returned Trajectory, generator_values holds A_m z,
    reconstructed as z' - w - f.

    Raises:
        UnsupportedKernelError: the kernel is not exponential.
    """
    prob = system.problem
    kernel = prob.kernel
    if not kernel.is_exponential:
        raise UnsupportedKernelError(f'{kernel.spec}: the boundary solver needs an exponential kernel')
    abscissa = system.spectral_abscissa()
    numerical = system.numerical_abscissa()
    logger.debug('boundary generator: spectral abscissa %.6g, numerical abscissa %.6g', abscissa, numerical)
    if abscissa >= 0.0:
        logger.warning('perturbed generator at N=%d has spectral abscissa %.6g >= 0', prob.op.mode_count, abscissa)
    if numerical > -prob.op.growth_bound():
        logger.warning('perturbed generator at N=%d is not dissipative up to shift lambda_1 (numerical abscissa '
                       '%.6g)', prob.op.mode_count, numerical)

    modes = prob.op.mode_count
    size = 2 * modes
    h = prob.step
    block = np.zeros((size + modes, size + modes))
    block[:modes, :modes] = system.generator * h
    block[:modes, modes:size] = np.eye(modes) * h
    block[modes:size, :modes] = np.diag(kernel.beta * prob.memory_powers) * h
    block[modes:size, modes:size] = -kernel.gamma * np.eye(modes) * h
    block[:modes, size:] = np.eye(modes) * h
    exponential = linalg.expm(block)
    propagator = exponential[:size, :size]
    forcing_map = exponential[:size, size:]
    midpoints = prob.forcing_midpoints()
    logger.info('boundary solve: %d modes, %d steps, ||K||=%.3g', modes, prob.step_count, system.feedback_norm)

    values = np.zeros((prob.step_count + 1, size))
    for n in range(prob.step_count):
        values[n + 1] = propagator @ values[n] + forcing_map @ midpoints[n]
    states, memory = values[:, :modes], values[:, modes:]
    forcing = prob.forcing_samples()
    derivatives = states @ system.generator.T + memory + forcing
    return Trajectory(prob.times, states, memory, derivatives, derivatives - memory - forcing, 'boundary')


def boundary_rows(system: BoundarySystem, traj: Trajectory) -> List[dict]:
    """Rows t, norm_z, norm_Amz, boundary_values (Euclidean norm of G z(t) = K z(t))."""
    boundary = np.linalg.norm(system.feedback(traj.states), axis=1)
    norm_z = np.linalg.norm(traj.states, axis=1)
    norm_amz = np.linalg.norm(traj.generator_values, axis=1)
    return [{'t': float(t), 'norm_z': float(a), 'norm_Amz': float(b), 'boundary_values': float(c)}
            for t, a, b, c in zip(traj.times, norm_z, norm_amz, boundary)]


def boundary_regularity(system: BoundarySystem, traj: Trajectory, p: float = 2.0) -> SampleNorms:
    """L^p norms of z', A_m z, z and f; ratio gives the closed-loop regularity ratio."""
    return sample_norms(system.problem, traj, p)


@dataclass(frozen=True)
class ConditionHReport:
    """Numerical probes of the closed-loop conditions.

    Attributes:
        observation_constant: admissibility constant of C = K for A over the window (item 1).
        input_constant: empirical constant of ||Phi_t u|| <= c ||u||_{L^2} (item 2).
        input_output_constant: empirical constant of ||K Phi u||_{L^p} <= c ||u||_{L^p} (item 3).
        assumptions: the items that are assumed rather than checked.
    """
    p: float
    window: float
    observation_constant: float
    input_constant: float
    input_output_constant: float
    assumptions: Tuple[str, ...] = CONDITION_H_ASSUMPTIONS

    def rows(self) -> List[dict]:
        return [{'item': 1, 'probe': 'observation_constant', 'value': self.observation_constant},
                {'item': 2, 'probe': 'input_constant', 'value': self.input_constant},
                {'item': 3, 'probe': 'input_output_constant', 'value': self.input_output_constant}]


def condition_h_probes(system: BoundarySystem, p: float = 2.0, window: Optional[float] = None,
                       path_count: int = 100, seed: int = 0, time_samples: int = 33) -> ConditionHReport:
    """
    Probes items 1-3 of the closed-loop conditions for the triple (A, B, K) over [0, window].

    Item 3 samples t -> K Phi_t u on `time_samples` points (odd, for Simpson) from a single vector quadrature
    per path and compares L^p norms.
    """
    prob = system.problem
    window = prob.horizon if window is None else window
    _check_time(window)
    if time_samples < 3 or time_samples % 2 == 0:
        raise ValidationError(f'must be odd and >= 3, got {time_samples}', 'time_samples')
    op = prob.op
    observation = admissibility_constant(op, ObservationOperator.bounded(system.representers), p, window).estimate
    rng = np.random.default_rng(seed)
    paths = [BoundaryPath.random(rng) for _ in range(path_count)]
    input_constant = input_map_constant(op, paths, window)

    times = np.linspace(0.0, window, time_samples)
    spacing = times[1] - times[0]
    input_output = 0.0
    for path in paths:
        size = lp_time_norm(path.value(times), p, spacing)
        if size == 0.0:
            continue
        outputs = system.feedback(input_map_samples(op, path, times))
        input_output = max(input_output, lp_time_norm(outputs, p, spacing) / size)
    logger.info('condition probes: observation %.4g, input %.4g, input-output %.4g', observation, input_constant,
                input_output)
    return ConditionHReport(p, window, observation, input_constant, input_output)
