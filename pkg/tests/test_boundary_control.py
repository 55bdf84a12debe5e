import math

import numpy as np
import pytest
from scipy import linalg

from volterraveritas.boundary import BoundaryPath, BoundarySystem, DirichletMap, boundary_regularity, boundary_rows, \
    condition_h_probes, control_apply, control_columns, control_growth_scan, dirichlet_map, feedback_representers, \
    input_map, input_map_constant, input_map_samples, solve_boundary_volterra
from volterraveritas.kernels import MemoryKernel
from volterraveritas.solver import Forcing, VolterraProblem, solve_augmented
from volterraveritas.spectral import SpectralOperator
from volterraveritas.utils.errors import SpectralPointError, UnsupportedKernelError, ValidationError

PAIRS = [(1.0, 0.0), (0.0, 1.0), (0.7, -1.3)]


def test_control_columns():
    op = SpectralOperator.dirichlet(4)
    columns = control_columns(op)
    assert columns.shape == (4, 2)
    for k in range(1, 5):
        expected = math.sqrt(2.0) * k * math.pi * np.array([1.0, -(-1.0) ** k])
        np.testing.assert_allclose(columns[k - 1], expected, rtol=1e-15)
    with pytest.raises(ValidationError):
        control_columns(SpectralOperator.neumann(4))


@pytest.mark.parametrize('lam', [0.0, 1.0, 50.0, 1e4])
@pytest.mark.parametrize('u', PAIRS)
def test_dirichlet_map_inverts_the_trace(lam, u):
    table = DirichletMap(SpectralOperator.dirichlet(8), lam)
    np.testing.assert_allclose(table.trace(u), u, atol=1e-10)


def test_dirichlet_map_at_zero_is_the_linear_interpolant():
    table = DirichletMap(SpectralOperator.dirichlet(8), 0.0)
    x = np.linspace(0.0, 1.0, 11)
    np.testing.assert_allclose(table.evaluate((2.0, -1.0), x), 2.0 - 3.0 * x)
    assert table.interior_residual((2.0, -1.0)) < 1e-8


@pytest.mark.parametrize('lam', [4.0, 100.0])
def test_dirichlet_map_solves_the_interior_equation(lam):
    assert DirichletMap(SpectralOperator.dirichlet(8), lam).interior_residual((0.7, -1.3)) < 1e-5 * lam ** 2


@pytest.mark.parametrize('lam', [0.0, 3.0])
@pytest.mark.parametrize('u', PAIRS)
def test_sine_coefficients_match_quadrature(lam, u):
    table = DirichletMap(SpectralOperator.dirichlet(6), lam)
    np.testing.assert_allclose(table.coefficients(u), table.coefficients_by_quadrature(u), atol=1e-8)
    np.testing.assert_array_equal(dirichlet_map(table.op, lam, u).coefficients, table.coefficients(u))


def test_dirichlet_map_rejects():
    op = SpectralOperator.dirichlet(4)
    with pytest.raises(SpectralPointError):
        DirichletMap(op, -math.pi ** 2)
    with pytest.raises(ValidationError):
        DirichletMap(op, -1.0)
    with pytest.raises(ValidationError):
        DirichletMap(op, math.inf)
    with pytest.raises(ValidationError):
        DirichletMap(op, 0.0).coefficients((1.0, 2.0, 3.0))


@pytest.mark.parametrize('u', PAIRS)
def test_control_operator_does_not_depend_on_lambda(u):
    op = SpectralOperator.dirichlet(16)
    reference = control_apply(op, 0.0, u)
    for lam in (1.0, 10.0, 1e3):
        image = control_apply(op, lam, u)
        np.testing.assert_allclose(image.coefficients, reference.coefficients, rtol=1e-12)
        assert image.extrapolation_norm(op) == pytest.approx(reference.extrapolation_norm(op), rel=1e-9)


def test_control_image_leaves_the_state_space():
    rows = control_growth_scan((1.0, 0.0), [16, 64, 256])
    assert [row['modes'] for row in rows] == [16, 64, 256]
    norms = [row['norm_X'] for row in rows]
    assert norms[0] < norms[1] < norms[2]
    assert norms[2] > 6.0 * norms[1]
    # sum_k 2 / (k pi)^2 = 1/3
    assert rows[-1]['norm_extrapolated'] == pytest.approx(math.sqrt(1.0 / 3.0), rel=1e-2)
    assert all(row['norm_extrapolated'] <= math.sqrt(1.0 / 3.0) for row in rows)


def test_boundary_path():
    path = BoundaryPath.monomial(2)
    assert path.l2_norm(1.0) == pytest.approx(math.sqrt(0.2), rel=1e-14)
    np.testing.assert_allclose(path.value([0.0, 0.5]), [[0.0, 0.0], [0.25, 0.0]])
    np.testing.assert_allclose(path.derivative(0.5), [1.0, 0.0])
    assert BoundaryPath.monomial(3, 1.0, 2.0).l2_norm(1.0) == pytest.approx(math.sqrt(5.0 / 7.0))
    with pytest.raises(ValidationError):
        BoundaryPath([1.0], [0.0])
    with pytest.raises(ValidationError):
        BoundaryPath([0.0, 1.0], [0.0])
    with pytest.raises(ValidationError):
        BoundaryPath.random(np.random.default_rng(0), degree=1)
    drawn = BoundaryPath.random(np.random.default_rng(0))
    np.testing.assert_allclose(drawn.value(0.0), 0.0)
    np.testing.assert_allclose(drawn.derivative(0.0), 0.0)


@pytest.mark.parametrize('path', [BoundaryPath.monomial(2), BoundaryPath.monomial(3, 0.5, -1.0)])
def test_input_map_forms_agree(path):
    op = SpectralOperator.dirichlet(8)
    parts = input_map(op, path, 1.0, form='parts')
    convolution = input_map(op, path, 1.0, form='convolution')
    np.testing.assert_allclose(parts.coefficients, convolution.coefficients, atol=1e-6)


def test_input_map_edge_cases():
    op = SpectralOperator.dirichlet(4)
    path = BoundaryPath.monomial(2)
    assert input_map(op, path, 0.0).norm() == 0.0
    with pytest.raises(ValidationError):
        input_map(op, path, -1.0)
    with pytest.raises(ValidationError):
        input_map(op, path, 1.0, form='fourier')
    with pytest.raises(ValidationError):
        input_map(op, (1.0, 0.0), 1.0)


def test_input_map_samples_match_pointwise_evaluation():
    op = SpectralOperator.dirichlet(6)
    path = BoundaryPath.monomial(2, 1.0, 0.5)
    times = np.linspace(0.0, 1.0, 5)
    samples = input_map_samples(op, path, times)
    assert samples.shape == (5, 6)
    np.testing.assert_allclose(samples[0], 0.0, atol=1e-12)
    for t, row in zip(times[1:], samples[1:]):
        np.testing.assert_allclose(row, input_map(op, path, t, form='convolution').coefficients, atol=1e-8)


def test_input_map_constant_is_finite():
    op = SpectralOperator.dirichlet(8)
    rng = np.random.default_rng(3)
    constant = input_map_constant(op, [BoundaryPath.random(rng) for _ in range(3)], 0.5)
    assert 0.0 < constant < math.inf
    assert input_map_constant(op, [BoundaryPath([0.0], [0.0])], 0.5) == 0.0


def test_feedback_representers():
    matrix = feedback_representers(16, 0.3, seed=2)
    assert matrix.shape == (2, 16)
    assert np.linalg.norm(matrix, 2) == pytest.approx(0.3)
    np.testing.assert_array_equal(matrix, feedback_representers(16, 0.3, seed=2))
    assert np.any(matrix != feedback_representers(16, 0.3, seed=3))
    assert not np.any(feedback_representers(16, 0.0, seed=2))
    with pytest.raises(ValidationError):
        feedback_representers(16, -1.0, seed=2)


def test_zero_feedback_reproduces_the_interior_solver(make_problem):
    prob = make_problem(modes=8, horizon=0.5, step=1e-3)
    system = BoundarySystem(prob, feedback_representers(8, 0.0, seed=0))
    traj = solve_boundary_volterra(system)
    assert traj.solver == 'boundary'
    reference = solve_augmented(prob)
    np.testing.assert_allclose(traj.states, reference.states, atol=1e-8)
    np.testing.assert_allclose(traj.memory, reference.memory, atol=1e-8)


def test_memoryless_closed_loop_matches_matrix_exponential(make_problem):
    prob = make_problem(modes=8, kernel=MemoryKernel.exponential(0.0, 1.0), horizon=0.3, step=1e-2)
    system = BoundarySystem(prob, feedback_representers(8, 0.1, seed=5))
    assert system.spectral_abscissa() < 0.0
    traj = solve_boundary_volterra(system)
    forcing = prob.forcing_samples()[0]
    generator = system.generator
    exact = linalg.solve(generator, (linalg.expm(generator * prob.horizon) - np.eye(8)) @ forcing)
    np.testing.assert_allclose(traj.states[-1], exact, atol=1e-9)
    np.testing.assert_allclose(traj.memory, 0.0, atol=1e-14)


def test_closed_loop_rows_and_feedback(make_problem):
    prob = make_problem(modes=8, horizon=0.1, step=1e-3, seed=1)
    system = BoundarySystem(prob, feedback_representers(8, 0.5, seed=1))
    assert system.feedback_norm == pytest.approx(0.5)
    traj = solve_boundary_volterra(system)
    rows = boundary_rows(system, traj)
    assert len(rows) == prob.step_count + 1
    assert set(rows[0]) == {'t', 'norm_z', 'norm_Amz', 'boundary_values'}
    assert rows[-1]['boundary_values'] == pytest.approx(float(np.linalg.norm(system.representers @ traj.states[-1])))
    np.testing.assert_allclose(traj.derivatives - traj.memory - prob.forcing_samples(), traj.generator_values)


def test_closed_loop_ratio_is_stable_under_refinement(make_problem):
    prob = make_problem(modes=8, horizon=0.5, step=1e-3)
    system = BoundarySystem(prob, feedback_representers(8, 0.1, seed=0))
    coarse = boundary_regularity(system, solve_boundary_volterra(system))
    fine_system = system.refined()
    assert fine_system.problem.op.mode_count == 16
    fine = boundary_regularity(fine_system, solve_boundary_volterra(fine_system))
    assert fine.ratio == pytest.approx(coarse.ratio, rel=5e-2)


def test_boundary_system_rejects(make_problem, unit_exponential):
    neumann = VolterraProblem(SpectralOperator.neumann(4), 0.5, unit_exponential, Forcing.constant(4, 1), 0.1, 1e-2)
    with pytest.raises(ValidationError):
        BoundarySystem(neumann, np.zeros((2, 4)))
    with pytest.raises(ValidationError):
        BoundarySystem(make_problem(modes=4, perturbation_scale=0.1), np.zeros((2, 4)))
    with pytest.raises(ValidationError):
        BoundarySystem(make_problem(modes=4), np.zeros((2, 5)))
    monomial = BoundarySystem(make_problem(modes=4, kernel=MemoryKernel.monomial_exponential(1.0, 1.0, 1)),
                              np.zeros((2, 4)))
    with pytest.raises(UnsupportedKernelError):
        solve_boundary_volterra(monomial)


def test_condition_probes(make_problem):
    prob = make_problem(modes=8, horizon=0.25, step=1e-3)
    system = BoundarySystem(prob, feedback_representers(8, 0.5, seed=0))
    report = condition_h_probes(system, path_count=3, seed=1, time_samples=9)
    assert report.window == 0.25
    values = [row['value'] for row in report.rows()]
    assert [row['item'] for row in report.rows()] == [1, 2, 3]
    assert all(0.0 < value < math.inf for value in values)
    assert report.observation_constant <= 0.5 * math.sqrt(0.25) * (1.0 + 1e-9)
    assert len(report.assumptions) == 2
    with pytest.raises(ValidationError):
        condition_h_probes(system, path_count=3, time_samples=8)
