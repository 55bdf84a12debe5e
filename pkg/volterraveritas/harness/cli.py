from __future__ import annotations
from json import dumps
from typing import Dict, List, Optional
import argparse
import logging
import sys

from volterraveritas import __version__
from volterraveritas.harness.config import ExperimentConfig
from volterraveritas.harness.experiments import Experiment
from volterraveritas.utils.errors import NumericalError, ValidationError
from volterraveritas.utils.utils import dict_to_csv

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

#: Scenarios whose rows depend on the seed through a sampled ensemble.
SEEDED_SCENARIOS = ('maxreg', 'trace-bound')

#: Flags of every subcommand as (flag, parameter name, argparse keyword arguments).
SCENARIO_FLAGS = {
    'solve': [
        ('--modes', 'modes', {'type': int}),
        ('--boundary', 'boundary', {'choices': ['dirichlet', 'neumann']}),
        ('--alpha', 'alpha', {'type': float}),
        ('--kernel', 'kernel', {}),
        ('--forcing', 'forcing', {'choices': ['const', 'random-seeded', 'single-mode']}),
        ('--forcing-mode', 'forcing_mode', {'type': int}),
        ('--T', 'T', {'type': float}),
        ('--dt', 'dt', {'type': float}),
        ('--solver', 'solver', {'choices': ['aug', 'cq', 'both']}),
        ('--perturbation-scale', 'perturbation_scale', {'type': float}),
        ('--perturbation-power', 'perturbation_power', {'type': float}),
    ],
    'boundary': [
        ('--modes', 'modes', {'type': int}),
        ('--alpha', 'alpha', {'type': float}),
        ('--kernel', 'kernel', {}),
        ('--knorm', 'knorm', {'type': float}),
        ('--forcing', 'forcing', {'choices': ['const', 'random-seeded', 'single-mode']}),
        ('--T', 'T', {'type': float}),
        ('--dt', 'dt', {'type': float}),
        ('--p', 'p', {'type': float}),
        ('--paths', 'paths', {'type': int}),
    ],
    'bergman': [
        ('--kernel', 'kernels', {'action': 'append'}),
        ('--q', 'q', {'type': float, 'action': 'append'}),
        ('--theta', 'theta', {'type': float, 'action': 'append'}),
    ],
    'lemma4': [
        ('--kernel', 'kernels', {'action': 'append'}),
        ('--q', 'q', {'type': float}),
        ('--s', 's', {'type': float}),
        ('--theta', 'theta', {'type': float}),
        ('--R', 'R', {'type': float, 'action': 'append'}),
        ('--optimize-alpha', 'optimize_alpha', {'action': 'store_const', 'const': True}),
    ],
    'exponents': [
        ('--samples', 'samples', {'type': int}),
        ('--q-min', 'q_min', {'type': float}),
        ('--q-max', 'q_max', {'type': float}),
        ('--l-min', 'l_min', {'type': float}),
        ('--l-max', 'l_max', {'type': float}),
    ],
    'admissibility': [
        ('--modes', 'modes', {'type': int}),
        ('--power', 'power', {'type': float}),
        ('--p', 'p', {'type': float}),
        ('--window', 'windows', {'type': float, 'action': 'append'}),
        ('--probes', 'random_probes', {'type': int}),
        ('--kernel', 'kernel', {}),
        ('--q', 'q', {'type': float}),
        ('--theta', 'theta', {'type': float}),
    ],
    'maxreg': [
        ('--modes', 'modes', {'type': int}),
        ('--alpha', 'alpha', {'type': float}),
        ('--kernel', 'kernel', {}),
        ('--T', 'T', {'type': float}),
        ('--dt', 'dt', {'type': float}),
        ('--p', 'p', {'type': float}),
        ('--l0', 'l0', {'type': float}),
        ('--ensemble', 'ensemble', {'type': int}),
        ('--q', 'q', {'type': float}),
        ('--theta', 'theta', {'type': float}),
    ],
    'trace-bound': [
        ('--modes', 'modes', {'type': int}),
        ('--alpha', 'alpha', {'type': float}),
        ('--kernel', 'kernel', {}),
        ('--T', 'T', {'type': float}),
        ('--dt', 'dt', {'type': float}),
        ('--p', 'p', {'type': float}),
        ('--q', 'q', {'type': float}),
        ('--theta', 'theta', {'type': float}),
        ('--samples', 'samples', {'type': int}),
    ],
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--seed', type=int, default=argparse.SUPPRESS, help='seed of every random draw (default 0)')
    common.add_argument('--out', default=argparse.SUPPRESS, help='CSV path; stdout when omitted')
    common.add_argument('--tol', type=float, default=argparse.SUPPRESS, help='quadrature tolerance (default 1e-8)')
    common.add_argument('--config', default=argparse.SUPPRESS, help='JSON config file; flags override its values')
    common.add_argument('--verbose', action='store_true', default=argparse.SUPPRESS, help='debug logging on stderr')

    parser = argparse.ArgumentParser(prog='volterraveritas', parents=[common],
                                     description='Numerical checks of maximal L^p-regularity for Volterra '
                                                 'integro-differential equations.')
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    subparsers = parser.add_subparsers(dest='scenario', required=True)
    for scenario, flags in SCENARIO_FLAGS.items():
        subparser = subparsers.add_parser(scenario, parents=[common])
        for flag, name, options in flags:
            subparser.add_argument(flag, dest=f'param_{name}', default=None, **options)
    return parser


def _overrides(namespace: argparse.Namespace) -> Dict:
    return {key[len('param_'):]: value for key, value in vars(namespace).items() if key.startswith('param_')}


def write_outputs(experiment: Experiment, out: Optional[str], status: str):
    """Writes the CSV (to out or stdout) and, for file output, the <out>.meta.json sidecar."""
    if out is None:
        dict_to_csv(experiment.rows, experiment.columns, sys.stdout)
        return
    dict_to_csv(experiment.rows, experiment.columns, out)
    with open(f'{out}.meta.json', 'w') as meta_file:
        meta_file.write(dumps(experiment.metadata(status), indent=2, sort_keys=True))
        meta_file.write('\n')


def main(argv: Optional[List[str]] = None) -> int:
    """
    Entry point. Exit codes: 0 success, 2 invalid input, 3 numerical failure (rows computed so far are still
    written).
    """
    args = build_parser().parse_args(argv)
    options = {key: getattr(args, key, None) for key in ('seed', 'out', 'tol', 'config')}
    level = logging.DEBUG if getattr(args, 'verbose', False) else logging.WARNING
    logging.basicConfig(level=level, stream=sys.stderr, format='%(levelname)s %(name)s: %(message)s')
    try:
        file_values = ExperimentConfig.read_file(options['config']) if options['config'] else None
        config = ExperimentConfig.build(args.scenario, file_values, _overrides(args), seed=options['seed'],
                                        out=options['out'], tol=options['tol'])
    except ValidationError as error:
        print(f'error: {error}', file=sys.stderr)
        return EXIT_VALIDATION
    if args.scenario in SEEDED_SCENARIOS and options['seed'] is None and 'seed' not in (file_values or {}):
        logger.warning('%s samples a random ensemble and no --seed was given; using seed %d', args.scenario,
                       config.seed)

    experiment = Experiment(config)
    try:
        experiment.run()
    except ValidationError as error:
        print(f'error: {error}', file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as error:
        logger.error('numerical failure after %d rows: %s', len(experiment.rows), error)
        print(f'numerical failure: {error}', file=sys.stderr)
        write_outputs(experiment, config.out, 'numerical-failure')
        return EXIT_NUMERICAL
    write_outputs(experiment, config.out, 'ok')
    return EXIT_OK
