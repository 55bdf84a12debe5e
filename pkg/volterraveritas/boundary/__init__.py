from volterraveritas.boundary.boundary_control import DirichletMap, BoundaryPath, BoundarySystem, ConditionHReport, \
    dirichlet_map, control_apply, control_columns, control_growth_scan, input_map, input_map_samples, \
    input_map_constant, feedback_representers, solve_boundary_volterra, boundary_rows, boundary_regularity, \
    condition_h_probes, CONDITION_H_ASSUMPTIONS
