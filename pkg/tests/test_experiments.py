import math

import numpy as np
import pytest

from volterraveritas import __version__
from volterraveritas.harness import COLUMNS, SOLVE_TOLERANCE, Experiment, ExperimentConfig
from volterraveritas.utils.errors import NumericalError, UnsupportedKernelError, ValidationError


def run(scenario, seed=0, **params):
    experiment = Experiment(ExperimentConfig(scenario, params, seed=seed))
    experiment.run()
    return experiment


def assert_checks_pass(experiment):
    for check in experiment.checks:
        assert check['passed'] in (True, None), check


def test_exponents():
    experiment = run('exponents', samples=50, q_min=2.5)
    assert len(experiment.rows) == 50
    assert all(row['valid'] for row in experiment.rows)
    assert experiment.checks == [{'name': 'exponent selector postcondition', 'passed': True, 'failures': 0}]


def test_bergman_norm_table():
    experiment = run('bergman', kernels=['exp:1,1', 'mexp:1,1,1'], q=[2.0], theta=[math.pi / 4])
    assert [row['kernel'] for row in experiment.rows] == ['exp:1.0,1.0', 'mexp:1.0,1.0,1']
    assert experiment.rows[0]['norm'] == pytest.approx(math.sqrt(0.5), rel=1e-6)
    assert list(experiment.rows[0]) == COLUMNS['bergman']


def test_lemma4_grid():
    experiment = run('lemma4', kernels=['exp:1,1', 'exp:2,3'], R=[0.1, 1.0])
    assert len(experiment.rows) == 4
    assert all(row['satisfied'] for row in experiment.rows)
    assert_checks_pass(experiment)
    optimized = run('lemma4', kernels=['exp:1,1'], R=[1.0], optimize_alpha=True)
    assert optimized.rows[0]['C_R'] <= experiment.rows[1]['C_R']


def test_admissibility_scan():
    experiment = run('admissibility', modes=16, windows=[0.1, 1.0], perturbation_probes=10)
    assert [row['window'] for row in experiment.rows] == [0.1, 1.0]
    assert experiment.rows[-1]['estimate'] == pytest.approx(1.0 / math.sqrt(2.0), rel=1e-6)
    assert [check['passed'] for check in experiment.checks] == [True, True]


def test_solve_with_both_solvers():
    experiment = run('solve', modes=8, T=0.1, solver='both')
    assert len(experiment.rows) == 101
    assert list(experiment.rows[0]) == COLUMNS['solve']
    assert experiment.rows[0]['norm_z'] == 0.0
    residual, agreement = experiment.checks
    assert residual['name'] == 'integrated equation residual'
    assert agreement['name'] == 'cross-solver agreement'
    assert agreement['max_distance'] < 1e-4
    assert residual['passed'] is True and agreement['passed'] is True
    assert agreement['threshold'] == SOLVE_TOLERANCE


def test_solve_checks_compare_against_the_threshold():
    experiment = run('solve', modes=16, T=0.5, dt=0.05, solver='both', kernel='exp:50,1')
    residual, agreement = experiment.checks
    assert agreement['passed'] is False
    assert agreement['max_distance'] > agreement['threshold'] >= SOLVE_TOLERANCE
    assert residual['passed'] is (residual['max_residual'] <= residual['threshold'])
    assert all(type(value) in (str, bool, float) for value in residual.values())


def test_seeded_forcing_is_reproducible():
    first = run('solve', seed=5, modes=8, T=0.05, forcing='random-seeded', solver='aug')
    second = run('solve', seed=5, modes=8, T=0.05, forcing='random-seeded', solver='aug')
    other = run('solve', seed=6, modes=8, T=0.05, forcing='random-seeded', solver='aug')
    assert first.rows == second.rows
    assert first.rows != other.rows


def test_maxreg_single_row():
    experiment = run('maxreg', modes=8, ensemble=2)
    assert len(experiment.rows) == 1
    assert experiment.rows[0]['samples'] == 4
    assert experiment.rows[0]['beta_small']
    names = [check['name'] for check in experiment.checks]
    assert 'smallness condition' in names
    for check in experiment.checks:
        assert not any(isinstance(value, np.generic) for value in check.values()), check


def test_trace_bound_rows():
    experiment = run('trace-bound', modes=8, T=0.25, samples=3)
    assert [row['sample'] for row in experiment.rows] == [0, 1, 2]
    assert_checks_pass(experiment)


def test_boundary_scenario():
    experiment = run('boundary', modes=8, T=0.1, paths=2)
    assert len(experiment.rows) == 101
    assert list(experiment.rows[0]) == COLUMNS['boundary']
    assert_checks_pass(experiment)
    assumed = [check for check in experiment.checks if check['passed'] is None]
    assert len(assumed) == 2


def test_failures_keep_the_rows_computed_so_far():
    experiment = Experiment(ExperimentConfig('boundary', {'modes': 4, 'T': 0.1, 'kernel': 'mexp:1,1,1'}))
    with pytest.raises(UnsupportedKernelError):
        experiment.run()
    assert experiment.rows == []
    assert isinstance(UnsupportedKernelError('x'), NumericalError)


@pytest.mark.parametrize('scenario, params', [('solve', {'alpha': 0.9}), ('solve', {'kernel': 'gauss:1'}),
                                              ('solve', {'boundary': 'robin'}), ('solve', {'forcing': 'noise'})])
def test_invalid_parameters_surface_as_validation_errors(scenario, params):
    with pytest.raises(ValidationError):
        run(scenario, **params)


def test_metadata():
    experiment = run('exponents', seed=9, samples=3, q_min=3.0)
    meta = experiment.metadata('ok')
    assert meta['status'] == 'ok'
    assert meta['seed'] == 9
    assert meta['rows'] == 3
    assert meta['version'] == __version__
    assert meta['params']['samples'] == 3
