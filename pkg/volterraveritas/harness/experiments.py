from __future__ import annotations
from typing import Callable, Dict, List, Sequence
import logging
import math

import numpy as np

from volterraveritas import __version__
from volterraveritas.bergman import Lemma4Params, SectorSpec, bergman_norm_with_error, choose_exponent, \
    embedding_check, lemma4_constant
from volterraveritas.boundary import BoundarySystem, boundary_regularity, boundary_rows, condition_h_probes, \
    feedback_representers, solve_boundary_volterra
from volterraveritas.harness.config import ExperimentConfig
from volterraveritas.kernels import parse_kernel_spec
from volterraveritas.regularity import ObservationOperator, admissibility_constant, history_trace_bound, \
    maxreg_verify, perturbation_admissibility_bound
from volterraveritas.solver import Forcing, VolterraProblem, residual_profile, solve, trajectory_distance
from volterraveritas.spectral import SpectralOperator
from volterraveritas.utils.errors import ValidationError

logger = logging.getLogger(__name__)

"""
Coordinates the numerical modules for the command line. An Experiment turns one ExperimentConfig into CSV rows
and a list of named checks. Rows are appended as they are produced, so whatever was computed before a
numerical failure is still there to be written out.
"""

#: Residual and cross-solver distance a solve may reach, relative to max(1, sup ||z(t)||).
SOLVE_TOLERANCE = 1e-4

#: CSV header of every scenario.
COLUMNS: Dict[str, List[str]] = {
    'solve': ['t', 'norm_z', 'norm_Az', 'norm_w', 'residual'],
    'boundary': ['t', 'norm_z', 'norm_Amz', 'boundary_values'],
    'bergman': ['kernel', 'q', 'theta', 'norm', 'quad_error_estimate'],
    'lemma4': ['q', 's', 'theta', 'alpha', 'R', 'C_R', 'lhs', 'rhs', 'satisfied'],
    'exponents': ['q', 'l', 's', 'p', 'valid'],
    'admissibility': ['p', 'window', 'operator', 'estimate', 'closed_form', 'sample_count'],
    'maxreg': ['p', 'T', 'samples', 'max_ratio', 'mean_ratio', 'max_ratio_half', 'stable', 'gamma_T', 'C_T',
               'kernel_norm', 'q_effective', 'beta_T', 'beta_small', 'chain_bound'],
    'trace-bound': ['sample', 'lhs', 'rhs', 'C_T', 'kernel_norm', 'q_effective', 'satisfied'],
}


class Experiment:
    """Runs one scenario.

    Args:
        config: resolved configuration.

    Attributes:
        rows (List[dict]): CSV rows produced so far.
        checks (List[dict]): named property checks with their outcome, for the metadata sidecar.
    """

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.columns = COLUMNS[config.scenario]
        self.rows: List[Dict] = []
        self.checks: List[Dict] = []
        self.runners: Dict[str, Callable[[], None]] = {
            'solve': self.run_solve,
            'boundary': self.run_boundary,
            'bergman': self.run_bergman,
            'lemma4': self.run_lemma4,
            'exponents': self.run_exponents,
            'admissibility': self.run_admissibility,
            'maxreg': self.run_maxreg,
            'trace-bound': self.run_trace_bound,
        }

    def run(self) -> List[Dict]:
        logger.info('running scenario %s with seed %d', self.config.scenario, self.config.seed)
        self.runners[self.config.scenario]()
        return self.rows

    def metadata(self, status: str) -> Dict:
        """Sidecar record: configuration, version and the checks exercised."""
        return {'scenario': self.config.scenario, 'params': self.config.params, 'seed': self.config.seed,
                'tol': self.config.tol, 'version': __version__, 'status': status, 'rows': len(self.rows),
                'checks': self.checks}

    def add_row(self, row: Dict):
        self.rows.append({column: row[column] for column in self.columns})

    def add_check(self, name: str, passed, **values):
        record = {'name': name, 'passed': passed, **values}
        self.checks.append({key: value.item() if isinstance(value, np.generic) else value
                            for key, value in record.items()})

    def operator(self) -> SpectralOperator:
        boundary = self.config.params.get('boundary', 'dirichlet')
        if boundary == 'dirichlet':
            return SpectralOperator.dirichlet(self.config['modes'])
        if boundary == 'neumann':
            return SpectralOperator.neumann(self.config['modes'])
        raise ValidationError(f"expected 'dirichlet' or 'neumann', got {boundary!r}", 'boundary')

    def forcing(self, modes: int) -> Forcing:
        kind = self.config['forcing']
        mode = self.config.params.get('forcing_mode', 1)
        if kind == 'const':
            return Forcing.constant(modes, mode)
        if kind == 'single-mode':
            return Forcing.single_mode(modes, mode)
        if kind == 'random-seeded':
            return Forcing.random(modes, np.random.default_rng(self.config.seed))
        raise ValidationError(f"expected 'const', 'single-mode' or 'random-seeded', got {kind!r}", 'forcing')

    def problem(self, op: SpectralOperator, forcing: Forcing) -> VolterraProblem:
        params = self.config.params
        return VolterraProblem(op, params['alpha'], parse_kernel_spec(params['kernel']), forcing, params['T'],
                               params['dt'], params.get('perturbation_scale', 0.0),
                               params.get('perturbation_power', 0.5))

    def run_solve(self):
        op = self.operator()
        prob = self.problem(op, self.forcing(op.mode_count))
        choice = self.config['solver']
        if choice not in ('aug', 'cq', 'both'):
            raise ValidationError(f"expected 'aug', 'cq' or 'both', got {choice!r}", 'solver')
        primary = solve(prob, 'cq' if choice == 'cq' else 'aug')
        residuals = residual_profile(prob, primary)
        norms = primary.pointwise_norms()
        for row, value in zip(norms, residuals):
            self.add_row({**row, 'residual': float(value)})
        threshold = SOLVE_TOLERANCE * max(1.0, max(row['norm_z'] for row in norms))
        max_residual = float(np.max(residuals))
        self.add_check('integrated equation residual', max_residual <= threshold, max_residual=max_residual,
                       threshold=threshold)
        if choice == 'both':
            distance = float(trajectory_distance(primary, solve(prob, 'cq')))
            self.add_check('cross-solver agreement', distance <= threshold, max_distance=distance,
                           threshold=threshold)

    def run_boundary(self):
        params = self.config.params
        op = SpectralOperator.dirichlet(params['modes'])
        prob = self.problem(op, self.forcing(op.mode_count))
        system = BoundarySystem(prob, feedback_representers(op.mode_count, params['knorm'], self.config.seed))
        traj = solve_boundary_volterra(system)
        for row in boundary_rows(system, traj):
            self.add_row(row)
        norms = boundary_regularity(system, traj, params['p'])
        self.add_check('closed-loop regularity ratio', math.isfinite(norms.ratio), ratio=norms.ratio)
        probes = condition_h_probes(system, params['p'], path_count=params['paths'], seed=self.config.seed)
        for row in probes.rows():
            self.add_check(f"condition item {row['item']}: {row['probe']}", math.isfinite(row['value']),
                           value=row['value'])
        for assumption in probes.assumptions:
            self.add_check(assumption, None)

    def run_bergman(self):
        params = self.config.params
        for text in params['kernels']:
            kernel = parse_kernel_spec(text)
            for q in params['q']:
                for theta in params['theta']:
                    norm, error = bergman_norm_with_error(kernel, SectorSpec(theta, q), self.config.tol)
                    self.add_row({'kernel': kernel.spec, 'q': q, 'theta': theta, 'norm': norm,
                                  'quad_error_estimate': error})

    def run_lemma4(self):
        params = self.config.params
        base = Lemma4Params(params['s'], params['q'], params['theta'])
        for text in params['kernels']:
            kernel = parse_kernel_spec(text)
            for radius in params['R']:
                chosen = base.optimize_alpha(radius)[0] if params['optimize_alpha'] else base
                self.add_row(embedding_check(kernel, chosen, radius, self.config.tol).row())
        shrinking = all(lemma4_constant(base, r / 2.0) < lemma4_constant(base, r) for r in params['R'])
        satisfied = all(row['satisfied'] for row in self.rows)
        self.add_check('embedding inequality grid', satisfied, kernels=params['kernels'])
        self.add_check('embedding constant shrinks with the radius', shrinking)

    def run_exponents(self):
        params = self.config.params
        rng = np.random.default_rng(self.config.seed)
        failures = 0
        for _ in range(params['samples']):
            q = float(rng.uniform(params['q_min'], params['q_max']))
            bound = float(rng.uniform(params['l_min'], params['l_max']))
            s, p = choose_exponent(q, bound)
            valid = 1.0 < s < 2.0 and 1.0 < p <= bound
            failures += not valid
            self.add_row({'q': q, 'l': bound, 's': s, 'p': p, 'valid': valid})
        self.add_check('exponent selector postcondition', failures == 0, failures=failures)

    def run_admissibility(self):
        params = self.config.params
        op = SpectralOperator.dirichlet(params['modes'])
        observation = ObservationOperator.frac_power(params['power'])
        estimates = []
        for window in params['windows']:
            report = admissibility_constant(op, observation, params['p'], window, params['random_probes'],
                                            self.config.seed)
            estimates.append(report.estimate)
            self.add_row(report.row())
        self.add_check('admissibility constant non-decreasing in the window',
                       all(a <= b for a, b in zip(estimates, estimates[1:])))
        perturbation = perturbation_admissibility_bound(parse_kernel_spec(params['kernel']), op, params['power'],
                                                        params['p'], params['q'], params['theta'],
                                                        min(params['windows']), params['perturbation_probes'],
                                                        self.config.seed)
        self.add_check('product-space admissibility estimate', perturbation.violations == 0,
                       violations=perturbation.violations, max_ratio=perturbation.max_ratio)

    def run_maxreg(self):
        params = self.config.params
        op = SpectralOperator.dirichlet(params['modes'])
        template = self.problem(op, Forcing.zero(op.mode_count))
        report = maxreg_verify(template, params['p'], params['ensemble'], self.config.seed, params['l0'],
                               params['q'], params['theta'])
        self.add_row(report.row())
        self.add_check('regularity ratio stable under ensemble doubling', report.stable)
        self.add_check('smallness condition', report.beta_small, beta_T=report.beta_T)
        self.add_check('ratio below the estimate chain bound', report.chain_satisfied,
                       chain_bound=report.chain_bound)

    def run_trace_bound(self):
        params = self.config.params
        op = SpectralOperator.dirichlet(params['modes'])
        children = np.random.SeedSequence(self.config.seed).spawn(params['samples'])
        for sample, child in enumerate(children):
            prob = self.problem(op, Forcing.random(op.mode_count, np.random.default_rng(child)))
            kernel = prob.kernel
            traj = solve(prob, 'aug' if kernel.is_exponential else 'cq')
            bound = history_trace_bound(prob, traj, params['p'], params['q'], params['theta'])
            self.add_row({'sample': sample, **bound.row()})
        self.add_check('memory trace bound', all(row['satisfied'] for row in self.rows))


def scenario_names() -> Sequence[str]:
    return tuple(COLUMNS)
