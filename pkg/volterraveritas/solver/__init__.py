from volterraveritas.solver.volterra_problem import Forcing, VolterraProblem, Trajectory
from volterraveritas.solver.volterra_solver import solve, solve_augmented, solve_cq, residual, residual_profile, \
    memory_trace_quadrature, memory_trace_discrepancy, trajectory_distance, convergence_study, ConvergenceStudy, \
    step_propagators
