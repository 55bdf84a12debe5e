import math

import numpy as np
import pytest

from volterraveritas.kernels import MemoryKernel
from volterraveritas.solver import Forcing, Trajectory, VolterraProblem
from volterraveritas.spectral import SpectralOperator, StateVector
from volterraveritas.utils.errors import ValidationError


def test_constant_and_single_mode_forcing():
    constant = Forcing.constant(4, 2, amplitude=3.0)
    np.testing.assert_allclose(constant.sample([0.0, 0.7]), [[0.0, 3.0, 0.0, 0.0]] * 2)
    wave = Forcing.single_mode(4, 1, frequency=1.0)
    assert wave(0.5).coefficients[0] == pytest.approx(-1.0)
    assert isinstance(wave(0.0), StateVector)


def test_random_forcing_is_seeded_and_band_limited():
    first = Forcing.random(8, np.random.default_rng(5), bandwidth=3)
    second = Forcing.random(8, np.random.default_rng(5), bandwidth=3)
    np.testing.assert_array_equal(first.spatial, second.spatial)
    assert np.all(first.spatial[:, 3:] == 0.0)
    assert np.any(first.spatial[:, :3] != 0.0)
    assert Forcing.random(8, np.random.default_rng(5)).label == 'random(bandwidth=4)'
    with pytest.raises(ValidationError):
        Forcing.random(8, np.random.default_rng(5), bandwidth=9)


def test_forcing_algebra():
    first = Forcing.constant(3, 1)
    second = Forcing.single_mode(3, 2, frequency=0.25)
    times = np.linspace(0.0, 1.0, 5)
    np.testing.assert_allclose((first + 2.0 * second).sample(times),
                               first.sample(times) + 2.0 * second.sample(times))
    padded = second.pad(6)
    np.testing.assert_allclose(padded.sample(times)[:, :3], second.sample(times))
    assert np.all(padded.sample(times)[:, 3:] == 0.0)
    with pytest.raises(ValidationError):
        first + Forcing.constant(4, 1)


def test_problem_grid(make_problem):
    prob = make_problem(horizon=0.5, step=0.01)
    assert prob.step_count == 50
    assert prob.times[-1] == pytest.approx(0.5)
    assert prob.forcing_samples().shape == (51, 8)
    assert prob.forcing_midpoints().shape == (50, 8)
    np.testing.assert_allclose(prob.memory_powers, prob.op.eigenvalues ** 0.5)
    assert prob.describe()['kernel'] == 'exp:1.0,1.0'


def test_decay_rates_include_the_interior_perturbation(make_problem):
    plain = make_problem()
    perturbed = make_problem(perturbation_scale=0.5, perturbation_power=0.25)
    np.testing.assert_allclose(perturbed.decay_rates, plain.op.eigenvalues - 0.5 * plain.op.eigenvalues ** 0.25)
    np.testing.assert_allclose(plain.decay_rates, plain.op.eigenvalues)


@pytest.mark.parametrize('changes', [{'alpha': 0.0}, {'alpha': 0.75}, {'horizon': -1.0}, {'step': 0.0},
                                     {'horizon': 1.0, 'step': 0.3}, {'perturbation_power': 0.9},
                                     {'perturbation_scale': math.nan}])
def test_problem_rejects(make_problem, changes):
    with pytest.raises(ValidationError):
        make_problem(**changes)


def test_problem_rejects_mismatched_forcing_and_nonzero_initial_state(unit_exponential):
    op = SpectralOperator.dirichlet(4)
    with pytest.raises(ValidationError):
        VolterraProblem(op, 0.5, unit_exponential, Forcing.constant(5, 1))
    with pytest.raises(ValidationError):
        VolterraProblem(op, 0.5, unit_exponential, Forcing.constant(4, 1), initial=StateVector.unit(4, 1))
    accepted = VolterraProblem(op, 0.5, unit_exponential, Forcing.constant(4, 1), initial=StateVector.zeros(4))
    assert accepted.step_count == 1000


def test_refined_problem_doubles_the_modes(make_problem):
    prob = make_problem(modes=4)
    fine = prob.refined()
    assert fine.op.mode_count == 8 and fine.forcing.size == 8
    assert prob.with_step(prob.step / 2).step_count == 2 * prob.step_count


def test_trajectory_assembly(make_problem):
    prob = make_problem(modes=2, horizon=0.01, step=0.005, kernel=MemoryKernel.exponential(0.0, 1.0))
    states = np.array([[0.0, 0.0], [0.1, 0.2], [0.3, 0.4]])
    memory = np.zeros_like(states)
    traj = Trajectory.assemble(prob, states, memory, 'manual')
    np.testing.assert_allclose(traj.generator_values, -prob.op.eigenvalues * states)
    np.testing.assert_allclose(traj.derivatives, traj.generator_values + prob.forcing_samples())
    rows = traj.pointwise_norms()
    assert [row['t'] for row in rows] == pytest.approx([0.0, 0.005, 0.01])
    assert rows[1]['norm_z'] == pytest.approx(math.hypot(0.1, 0.2))
    assert traj.state(2).norm() == pytest.approx(0.5)
    doubled = traj + traj
    np.testing.assert_allclose(doubled.states, 2.0 * states)
    with pytest.raises(ValidationError):
        Trajectory(traj.times[:2], states, memory, states, states)
