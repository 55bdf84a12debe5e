from __future__ import annotations
from dataclasses import dataclass
from typing import List, Tuple
import logging

import numpy as np
from scipy import integrate, linalg

from volterraveritas.solver.volterra_problem import Trajectory, VolterraProblem
from volterraveritas.utils.errors import StabilityError, UnsupportedKernelError, ValidationError

logger = logging.getLogger(__name__)

#: Smallest admissible denominator of the implicit a(0) memory update in solve_cq.
IMPLICIT_DENOMINATOR_FLOOR = 0.5


def step_propagators(matrices: np.ndarray, step: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Exact one-step propagators for a stack of linear systems y' = M y + e_1 c.

    The exponential of the augmented block [[M dt, dt e_1], [0, 0]] carries e^{M dt} in its upper-left
    block and dt * phi_1(M dt) e_1 in its last column, so both come out of one expm call.

    Args:
        matrices: (K, n, n) stack.
        step: dt.

    Returns:
        (propagators of shape (K, n, n), forcing columns of shape (K, n)).
    """
    count, size, _ = matrices.shape
    block = np.zeros((count, size + 1, size + 1))
    block[:, :size, :size] = matrices * step
    block[:, 0, size] = step
    exponential = linalg.expm(block)
    return exponential[:, :size, :size], exponential[:, :size, size]


def solve_augmented(prob: VolterraProblem) -> Trajectory:
    """
    Solves the Volterra equation for an exponential kernel through its augmented first-order system.

    For a(t) = beta e^{-gamma t} the memory trace w(t) = integral_0^t a(t - s) F z(s) ds satisfies
    w' = beta F z - gamma w, so each mode k carries the 2x2 system

        z_k' = -mu_k z_k + w_k + f_k,    w_k' = beta lambda_k^alpha z_k - gamma w_k,

    with mu_k the decay rate of A + P. Every step applies the exact propagator of that system with the
    forcing frozen at the midpoint of the step.

    Args:
        prob: the problem; its kernel must be exponential.

    Returns:
        Trajectory with z_0 = w_0 = 0.

    Raises:
        UnsupportedKernelError: the kernel has m > 0.
    """
    kernel = prob.kernel
    if not kernel.is_exponential:
        raise UnsupportedKernelError(f'{kernel.spec} has no finite-dimensional history state; use solve_cq')
    modes = prob.op.mode_count
    matrices = np.zeros((modes, 2, 2))
    matrices[:, 0, 0] = -prob.decay_rates
    matrices[:, 0, 1] = 1.0
    matrices[:, 1, 0] = kernel.beta * prob.memory_powers
    matrices[:, 1, 1] = -kernel.gamma
    propagators, columns = step_propagators(matrices, prob.step)
    midpoints = prob.forcing_midpoints()
    logger.info('augmented solve: %d modes, %d steps, kernel %s', modes, prob.step_count, kernel.spec)

    values = np.zeros((prob.step_count + 1, modes, 2))
    for n in range(prob.step_count):
        values[n + 1] = np.einsum('kij,kj->ki', propagators, values[n]) + columns * midpoints[n][:, None]
    return Trajectory.assemble(prob, values[:, :, 0], values[:, :, 1], 'aug')


def _phi_functions(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """phi_1(x) = (1 - e^{-x})/x and phi_2(x) = (x - 1 + e^{-x})/x^2, series near 0."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-4
    safe = np.where(small, 1.0, x)
    phi1 = np.where(small, 1.0 - x / 2.0 + x * x / 6.0, -np.expm1(-safe) / safe)
    phi2 = np.where(small, 0.5 - x / 6.0 + x * x / 24.0, (safe + np.expm1(-safe)) / safe ** 2)
    return phi1, phi2


def solve_cq(prob: VolterraProblem) -> Trajectory:
    """
    Solves the Volterra equation for any kernel of the family by exponential time differencing.

    The stiff part -mu_k z_k is integrated exactly, g = w + f is interpolated linearly over each step
    (z_{n+1} = e^{-mu h} z_n + h(phi_1 - phi_2) g_n + h phi_2 g_{n+1}) and the memory trace is the
    trapezoidal convolution sum w_n = h sum'' a(t_n - t_j) lambda^alpha z_j. Only its j = n term involves
    the unknown z_{n+1}, through a(0), so each step is a componentwise division.

    Args:
        prob: the problem.

    Returns:
        Trajectory with z_0 = w_0 = 0.

    Raises:
        StabilityError: h^2 phi_2 a(0) lambda^alpha / 2 comes close enough to 1 that the implicit
            memory update loses its meaning.
    """
    h = prob.step
    count = prob.step_count
    modes = prob.op.mode_count
    powers = prob.memory_powers
    rates = prob.decay_rates
    propagator = np.exp(-rates * h)
    phi1, phi2 = _phi_functions(rates * h)
    kernel_values = prob.kernel.on_halfline(prob.times)
    implicit = 0.5 * h * h * phi2 * kernel_values[0] * powers
    largest = float(np.max(np.abs(implicit))) if modes else 0.0
    logger.debug('cq solve: implicit memory weight up to %.3e', largest)
    if 1.0 - largest < IMPLICIT_DENOMINATOR_FLOOR:
        raise StabilityError(f'implicit memory weight {largest:.3g} for dt={h!r}; reduce dt or the number of modes')
    if largest > 0.1:
        logger.warning('cq solve: implicit memory weight %.3g at dt=%.3g is large', largest, h)
    denominator = 1.0 - implicit
    forcing = prob.forcing_samples()
    reversed_kernel = np.ascontiguousarray(kernel_values[::-1])
    logger.info('cq solve: %d modes, %d steps, kernel %s', modes, count, prob.kernel.spec)

    states = np.zeros((count + 1, modes))
    memory = np.zeros((count + 1, modes))
    for n in range(count):
        history = 0.5 * kernel_values[n + 1] * states[0]
        if n:
            history = history + reversed_kernel[count - n:count] @ states[1:n + 1]
        history = h * powers * history
        rhs = (propagator * states[n] + h * (phi1 - phi2) * (memory[n] + forcing[n])
               + h * phi2 * (history + forcing[n + 1]))
        states[n + 1] = rhs / denominator
        memory[n + 1] = history + 0.5 * h * kernel_values[0] * powers * states[n + 1]
    return Trajectory.assemble(prob, states, memory, 'cq')


def solve(prob: VolterraProblem, solver: str = 'aug') -> Trajectory:
    """Dispatches to solve_augmented ('aug') or solve_cq ('cq')."""
    if solver == 'aug':
        return solve_augmented(prob)
    if solver == 'cq':
        return solve_cq(prob)
    raise ValidationError(f"expected 'aug' or 'cq', got {solver!r}", 'solver')


def residual_profile(prob: VolterraProblem, traj: Trajectory) -> np.ndarray:
    """||z_j - integral_0^{t_j} z'(s) ds|| on the grid, the integral by cumulative Simpson."""
    _check_grid(prob, traj)
    if traj.step_count < 2:
        integral = np.vstack([np.zeros_like(traj.derivatives[:1]),
                              integrate.cumulative_trapezoid(traj.derivatives, dx=prob.step, axis=0)])
    else:
        integral = integrate.cumulative_simpson(traj.derivatives, dx=prob.step, axis=0, initial=0.0)
    return np.linalg.norm(traj.states - integral, axis=1)


def residual(prob: VolterraProblem, traj: Trajectory) -> float:
    """
    A posteriori defect of the integrated equation z(t) = integral_0^t [(A + P)z + w + f] ds.

    The derivative samples are recomputed from the states, memory and forcing (not taken from the solver)
    and integrated with an independent rule.

    Returns:
        max_j ||z_j - integral_0^{t_j} z'||.
    """
    derivatives = -prob.decay_rates * traj.states + traj.memory + prob.forcing_samples()
    checked = Trajectory(traj.times, traj.states, traj.memory, derivatives, traj.generator_values, traj.solver)
    return float(np.max(residual_profile(prob, checked)))


def memory_trace_quadrature(prob: VolterraProblem, traj: Trajectory) -> np.ndarray:
    """
    Direct quadrature of integral_0^{t_j} a(t_j - s) (-A)^alpha z(s) ds at every grid point.

    Simpson's rule on the grid samples of z; the first step, where only two samples exist, uses the
    trapezoid.

    Returns:
        (M+1, N) array.
    """
    _check_grid(prob, traj)
    h = prob.step
    kernel_values = prob.kernel.on_halfline(prob.times)
    weighted = traj.states * prob.memory_powers
    result = np.zeros_like(weighted)
    for j in range(1, traj.step_count + 1):
        integrand = kernel_values[j::-1, None] * weighted[:j + 1]
        if j == 1:
            result[j] = 0.5 * h * (integrand[0] + integrand[1])
        else:
            result[j] = integrate.simpson(integrand, dx=h, axis=0)
    return result


def memory_trace_discrepancy(prob: VolterraProblem, traj: Trajectory) -> float:
    """max_j ||w_j - quadrature_j|| / max_j ||quadrature_j||; 0 when both vanish."""
    direct = memory_trace_quadrature(prob, traj)
    scale = float(np.max(np.linalg.norm(direct, axis=1)))
    error = float(np.max(np.linalg.norm(traj.memory - direct, axis=1)))
    if scale == 0.0:
        return error
    return error / scale


def trajectory_distance(first: Trajectory, second: Trajectory) -> float:
    """max_j ||z_j - z'_j|| between two trajectories on the same grid."""
    if first.states.shape != second.states.shape:
        raise ValidationError(f'grids differ: {first.states.shape} vs {second.states.shape}', 'trajectory')
    return float(np.max(np.linalg.norm(first.states - second.states, axis=1)))


@dataclass(frozen=True)
class ConvergenceStudy:
    """Cross-solver discrepancies over successive step halvings and their fitted log-log slope."""
    steps: List[float]
    discrepancies: List[float]
    order: float

    def rows(self) -> List[dict]:
        return [{'dt': dt, 'discrepancy': d} for dt, d in zip(self.steps, self.discrepancies)]


def convergence_study(prob: VolterraProblem, halvings: int = 4) -> ConvergenceStudy:
    """
    Runs solve_augmented and solve_cq at dt, dt/2, ..., dt/2^halvings and fits
    log(discrepancy) = order * log(dt) + c with numpy.polyfit.

    Raises:
        UnsupportedKernelError: the kernel is not exponential.
    """
    if halvings < 1:
        raise ValidationError(f'need at least one halving, got {halvings}', 'halvings')
    steps, discrepancies = [], []
    for level in range(halvings + 1):
        refined = prob.with_step(prob.step / 2 ** level)
        distance = trajectory_distance(solve_augmented(refined), solve_cq(refined))
        logger.info('convergence study: dt=%.3e discrepancy=%.3e', refined.step, distance)
        steps.append(refined.step)
        discrepancies.append(distance)
    floor = np.finfo(float).tiny
    order = float(np.polyfit(np.log(steps), np.log(np.maximum(discrepancies, floor)), 1)[0])
    return ConvergenceStudy(steps, discrepancies, order)


def _check_grid(prob: VolterraProblem, traj: Trajectory):
    if traj.times.shape[0] != prob.step_count + 1 or traj.states.shape[1] != prob.op.mode_count:
        raise ValidationError('trajectory does not live on the problem grid', 'trajectory')
