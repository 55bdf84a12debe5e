from __future__ import annotations
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Union
import logging
import math

import numpy as np
from scipy import integrate

from volterraveritas.bergman.bergman_space import INEQUALITY_SLACK, SectorSpec, bergman_norm, \
    time_exponent_constant
from volterraveritas.regularity.admissibility import ObservationOperator, admissibility_constant
from volterraveritas.solver.volterra_problem import Forcing, Trajectory, VolterraProblem
from volterraveritas.solver.volterra_solver import solve
from volterraveritas.spectral.spectral_operator import StateVector
from volterraveritas.utils.errors import EnsembleMemberError, NumericalError, ValidationError
from volterraveritas.utils.utils import is_finite_number

logger = logging.getLogger(__name__)


def lp_time_norm(samples: Union[np.ndarray, Sequence[StateVector]], p: float, step: float) -> float:
    """
    (integral_0^T ||x(t)||^p dt)^(1/p) from samples on a uniform grid, composite Simpson on ||x||^p.

    Args:
        samples: (M+1, N) array or a sequence of StateVectors.
        p: exponent in (1, inf).
        step: grid spacing.

    Raises:
        ValidationError: fewer than 3 samples, p <= 1 or step <= 0.
    """
    if not is_finite_number(p) or p <= 1.0:
        raise ValidationError(f'must lie in (1, inf), got {p!r}', 'p')
    if not is_finite_number(step) or step <= 0.0:
        raise ValidationError(f'must be > 0, got {step!r}', 'dt')
    if len(samples) and isinstance(samples[0], StateVector):
        samples = np.vstack([x.coefficients for x in samples])
    values = np.atleast_2d(np.asarray(samples, dtype=float))
    if values.shape[0] < 3:
        raise ValidationError(f'need at least 3 samples, got {values.shape[0]}', 'samples')
    norms = np.linalg.norm(values, axis=1)
    return float(integrate.simpson(norms ** p, dx=step)) ** (1.0 / p)


@dataclass(frozen=True)
class SampleNorms:
    """L^p([0, T], X) norms of one ensemble member."""
    sample: int
    norm_dz: float
    norm_Az: float
    norm_z: float
    norm_f: float

    @property
    def ratio(self) -> float:
        """(||z'|| + ||Az|| + ||z||) / ||f||, NaN when f = 0."""
        if self.norm_f == 0.0:
            return math.nan
        return (self.norm_dz + self.norm_Az + self.norm_z) / self.norm_f

    def row(self) -> dict:
        return {'sample': self.sample, 'norm_dz': self.norm_dz, 'norm_Az': self.norm_Az, 'norm_z': self.norm_z,
                'norm_f': self.norm_f, 'ratio': self.ratio}


def sample_norms(prob: VolterraProblem, traj: Trajectory, p: float, sample: int = 0) -> SampleNorms:
    h = prob.step
    return SampleNorms(sample, lp_time_norm(traj.derivatives, p, h), lp_time_norm(traj.generator_values, p, h),
                       lp_time_norm(traj.states, p, h), lp_time_norm(prob.forcing_samples(), p, h))


@dataclass(frozen=True)
class RegularityReport:
    """Ensemble check of the maximal regularity estimate ||z'|| + ||Az|| + ||z|| <= C_p ||f||.

    Attributes:
        p, T: exponent and horizon.
        samples: per-member norms in sample order.
        max_ratio, mean_ratio: over every member with f != 0.
        max_ratio_half: max over the first half of the ensemble.
        gamma_T: admissibility constant of (-A)^alpha over [0, T].
        C_T: Bergman embedding constant at radius T for time exponent p.
        kernel_norm: ||a||_{B^q_theta} at q_effective.
        q_effective: Bergman exponent actually used.
        beta_T: gamma_T * T^{(p-1)/p} * C_T * ||a||_B; < 1 is the smallness condition.
        chain_bound: bound on the ratio assembled from the estimate chain (p = 2, no interior
            perturbation, smallness holds), NaN otherwise.
    """
    p: float
    T: float
    samples: List[SampleNorms]
    max_ratio: float
    mean_ratio: float
    max_ratio_half: float
    gamma_T: float
    C_T: float
    kernel_norm: float
    q_effective: float
    beta_T: float
    chain_bound: float
    excluded: int = 0

    @property
    def beta_small(self) -> bool:
        return bool(self.beta_T < 1.0)

    @property
    def stable(self) -> bool:
        """Doubling the ensemble moved the maximum ratio by less than 25%."""
        if not self.max_ratio_half > 0.0:
            return bool(self.max_ratio == self.max_ratio_half)
        return bool(abs(self.max_ratio - self.max_ratio_half) < 0.25 * self.max_ratio_half)

    @property
    def chain_satisfied(self) -> Optional[bool]:
        if math.isnan(self.chain_bound):
            return None
        return bool(self.max_ratio <= self.chain_bound * (1.0 + INEQUALITY_SLACK))

    def row(self) -> dict:
        return {'p': self.p, 'T': self.T, 'samples': len(self.samples), 'max_ratio': self.max_ratio,
                'mean_ratio': self.mean_ratio, 'max_ratio_half': self.max_ratio_half, 'stable': self.stable,
                'gamma_T': self.gamma_T, 'C_T': self.C_T, 'kernel_norm': self.kernel_norm,
                'q_effective': self.q_effective, 'beta_T': self.beta_T, 'beta_small': self.beta_small,
                'chain_bound': self.chain_bound}


@dataclass(frozen=True)
class ContractionConstants:
    """Factors of the smallness condition beta_T < 1 for one problem."""
    gamma_T: float
    C_T: float
    kernel_norm: float
    q_effective: float
    beta_T: float
    chain_bound: float


def contraction_constants(prob: VolterraProblem, p: float, q: float, theta: float) -> ContractionConstants:
    """
    Computes gamma_T, C_T, ||a||_B and beta_T = gamma_T T^{(p-1)/p} C_T ||a||_B for prob, and for p = 2 the
    chain bound (3 + 1/lambda_1) / (1 - beta~_T).

    beta~_T replaces gamma_T by eta_T = max(gamma_T, max_k lambda_k^alpha (1 - e^{-lambda_k T}) / lambda_k),
    the input-output constant of f -> F z for the memoryless problem; the chain bound is NaN when
    beta~_T >= 1, when p != 2 or when an interior perturbation is present.
    """
    horizon = prob.horizon
    gamma_t = admissibility_constant(prob.op, ObservationOperator.frac_power(prob.alpha), p, horizon).estimate
    c_t, q_effective = time_exponent_constant(p, q, theta, horizon)
    kernel_norm = bergman_norm(prob.kernel, SectorSpec(theta, q_effective))
    time_factor = horizon ** ((p - 1.0) / p)
    beta_t = gamma_t * time_factor * c_t * kernel_norm
    chain = math.nan
    if p == 2.0 and prob.perturbation_scale == 0.0:
        eigenvalues = prob.op.eigenvalues
        young = float(np.max(prob.memory_powers * -np.expm1(-eigenvalues * horizon) / eigenvalues))
        eta = max(gamma_t, young)
        beta_tilde = eta * time_factor * c_t * kernel_norm
        if beta_tilde < 1.0:
            chain = (3.0 + 1.0 / float(eigenvalues[0])) / (1.0 - beta_tilde)
    return ContractionConstants(gamma_t, c_t, kernel_norm, q_effective, beta_t, chain)


def maxreg_verify(template: VolterraProblem, p: float, ensemble_size: int, seed: int, l0: float = 2.0,
                  q: float = 4.0, theta: float = math.pi / 4, solver: Optional[str] = None,
                  bandwidth: Optional[int] = None, workers: Optional[int] = None) -> RegularityReport:
    """
    Solves the template problem for 2 * ensemble_size seeded band-limited random forcings and reports the
    ratio (||z'|| + ||Az|| + ||z||) / ||f|| in L^p([0, T], X).

    Members run on a ThreadPoolExecutor; each gets its own Generator spawned from numpy's SeedSequence, so
    the report does not depend on scheduling. The first ensemble_size members give max_ratio_half.

    Args:
        template: problem whose forcing is replaced per member.
        p: exponent in (1, l0].
        ensemble_size: E; 2E members are solved.
        seed: ensemble seed.
        l0: admissibility exponent in use.
        q, theta: Bergman space of the kernel for beta_T.
        solver: 'aug' or 'cq'; defaults to 'aug' for exponential kernels, 'cq' otherwise.
        bandwidth: highest forced mode, defaults to N // 2.
        workers: thread count, None lets the executor choose.

    Raises:
        EnsembleMemberError: a member's solve failed; carries its sample id.
    """
    if not is_finite_number(p) or not 1.0 < p <= l0:
        raise ValidationError(f'must lie in (1, {l0!r}], got {p!r}', 'p')
    if isinstance(ensemble_size, bool) or not isinstance(ensemble_size, int) or ensemble_size < 1:
        raise ValidationError(f'must be a positive integer, got {ensemble_size!r}', 'ensemble')
    solver = solver or ('aug' if template.kernel.is_exponential else 'cq')
    children = np.random.SeedSequence(seed).spawn(2 * ensemble_size)
    modes = template.op.mode_count

    def member(sample: int) -> SampleNorms:
        forcing = Forcing.random(modes, np.random.default_rng(children[sample]), bandwidth)
        prob = template.with_forcing(forcing)
        try:
            traj = solve(prob, solver)
        except NumericalError as error:
            raise EnsembleMemberError(sample, error) from error
        logger.debug('ensemble member %d solved', sample)
        return sample_norms(prob, traj, p, sample)

    logger.info('maxreg ensemble: %d members, p=%.3g, solver %s', 2 * ensemble_size, p, solver)
    with ThreadPoolExecutor(max_workers=workers) as executor:
        samples = list(executor.map(member, range(2 * ensemble_size)))

    ratios = np.array([s.ratio for s in samples])
    valid = ~np.isnan(ratios)
    half = valid[:ensemble_size]
    max_ratio = float(np.max(ratios[valid])) if valid.any() else math.nan
    mean_ratio = float(np.mean(ratios[valid])) if valid.any() else math.nan
    max_half = float(np.max(ratios[:ensemble_size][half])) if half.any() else math.nan
    constants = contraction_constants(template, p, q, theta)
    if not constants.beta_T < 1.0:
        logger.warning('beta_T = %.4g >= 1 at T=%.4g; the estimate chain does not close', constants.beta_T,
                       template.horizon)
    return RegularityReport(p, template.horizon, samples, max_ratio, mean_ratio, max_half, constants.gamma_T,
                            constants.C_T, constants.kernel_norm, constants.q_effective, constants.beta_T,
                            constants.chain_bound, int(np.sum(~valid)))


@dataclass(frozen=True)
class TraceBound:
    """Both sides of ||w||_{L^p} <= T^{(p-1)/p} C_T ||a||_B ||F z||_{L^p}."""
    lhs: float
    rhs: float
    C_T: float
    kernel_norm: float
    q_effective: float

    @property
    def satisfied(self) -> bool:
        return bool(self.lhs <= self.rhs * (1.0 + INEQUALITY_SLACK))

    def row(self) -> dict:
        return {'lhs': self.lhs, 'rhs': self.rhs, 'C_T': self.C_T, 'kernel_norm': self.kernel_norm,
                'q_effective': self.q_effective, 'satisfied': self.satisfied}


def history_trace_bound(prob: VolterraProblem, traj: Trajectory, p: float, q: float, theta: float) -> TraceBound:
    """
    Bound on the memory trace w(t) = integral_0^t a(t - s) F z(s) ds in L^p(0, T; X).

    Young's inequality gives ||w|| <= ||a||_{L^1(0,T)} ||F z|| <= T^{(p-1)/p} ||a||_{L^p(0,T)} ||F z||, and the
    Bergman embedding at radius T bounds ||a||_{L^p(0,T)} by C_T ||a||_{B^q_theta}. The embedding needs the
    Bergman exponent above 2p; smaller q are replaced by 3p (see time_exponent_constant).

    Returns:
        TraceBound(lhs, rhs, ...).
    """
    h = prob.step
    lhs = lp_time_norm(traj.memory, p, h)
    c_t, q_effective = time_exponent_constant(p, q, theta, prob.horizon)
    kernel_norm = bergman_norm(prob.kernel, SectorSpec(theta, q_effective))
    observed = lp_time_norm(traj.states * prob.memory_powers, p, h)
    rhs = prob.horizon ** ((p - 1.0) / p) * c_t * kernel_norm * observed
    return TraceBound(lhs, rhs, c_t, kernel_norm, q_effective)
