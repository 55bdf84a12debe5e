from volterraveritas.harness.config import ExperimentConfig
from volterraveritas.harness.experiments import Experiment, COLUMNS, SOLVE_TOLERANCE, scenario_names
from volterraveritas.harness.cli import main, build_parser, EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL
