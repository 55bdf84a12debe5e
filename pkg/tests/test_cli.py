import csv
import json
import logging

import pytest

from volterraveritas.harness import EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION, build_parser, main

SMALL_SOLVE = ['solve', '--modes', '4', '--T', '0.05', '--solver', 'aug']


def read_csv(path):
    with open(path, newline='') as csvfile:
        return list(csv.DictReader(csvfile))


def test_solve_writes_csv_and_sidecar(tmp_path):
    out = tmp_path / 'solve.csv'
    assert main(SMALL_SOLVE + ['--out', str(out)]) == EXIT_OK
    rows = read_csv(out)
    assert len(rows) == 51
    assert list(rows[0]) == ['t', 'norm_z', 'norm_Az', 'norm_w', 'residual']
    meta = json.loads((tmp_path / 'solve.csv.meta.json').read_text())
    assert meta['status'] == 'ok'
    assert meta['scenario'] == 'solve'
    assert meta['params']['modes'] == 4
    assert meta['rows'] == 51
    assert not any('time' in key for key in meta)


def test_runs_are_byte_identical(tmp_path):
    outputs = []
    for name in ('first.csv', 'second.csv'):
        out = tmp_path / name
        assert main(['exponents', '--samples', '20', '--seed', '3', '--out', str(out)]) == EXIT_OK
        outputs.append((out.read_bytes(), (tmp_path / f'{name}.meta.json').read_bytes()))
    assert outputs[0] == outputs[1]


def test_stdout_output(capsys):
    assert main(['exponents', '--samples', '5']) == EXIT_OK
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == 'q,l,s,p,valid'
    assert len(lines) == 6


def test_global_flags_before_the_subcommand(tmp_path):
    out = tmp_path / 'norms.csv'
    code = main(['--seed', '2', '--out', str(out), 'bergman', '--kernel', 'exp:1,1', '--q', '2', '--theta',
                 '0.7853981633974483'])
    assert code == EXIT_OK
    rows = read_csv(out)
    assert len(rows) == 1
    assert float(rows[0]['norm']) == pytest.approx(0.5 ** 0.5, rel=1e-6)
    assert json.loads((tmp_path / 'norms.csv.meta.json').read_text())['seed'] == 2


def test_config_file_with_flag_override(tmp_path):
    config = tmp_path / 'exponents.json'
    config.write_text(json.dumps({'scenario': 'exponents', 'seed': 1, 'params': {'samples': 7}}))
    out = tmp_path / 'out.csv'
    assert main(['exponents', '--config', str(config), '--samples', '4', '--out', str(out)]) == EXIT_OK
    assert len(read_csv(out)) == 4
    meta = json.loads((tmp_path / 'out.csv.meta.json').read_text())
    assert meta['seed'] == 1


@pytest.mark.parametrize('argv', [['solve', '--alpha', '0.9', '--modes', '4', '--T', '0.05'],
                                  ['solve', '--kernel', 'gauss:1'],
                                  ['maxreg', '--p', '2.5'],
                                  ['exponents', '--config', '/nonexistent/run.json']])
def test_invalid_input_exits_with_two(argv, capsys):
    assert main(argv) == EXIT_VALIDATION
    assert 'error' in capsys.readouterr().err


def test_numerical_failure_exits_with_three(tmp_path, capsys):
    out = tmp_path / 'unstable.csv'
    argv = ['solve', '--solver', 'cq', '--kernel', 'exp:1e6,1', '--dt', '0.1', '--modes', '1', '--out', str(out)]
    assert main(argv) == EXIT_NUMERICAL
    assert 'numerical failure' in capsys.readouterr().err
    assert out.read_text().startswith('t,norm_z')
    assert json.loads((tmp_path / 'unstable.csv.meta.json').read_text())['status'] == 'numerical-failure'


@pytest.mark.parametrize('argv', [['solve', '--solver', 'euler'], ['heat'], [], ['solve', '--modes', 'four']])
def test_argument_errors_exit_through_argparse(argv):
    with pytest.raises(SystemExit) as caught:
        main(argv)
    assert caught.value.code == 2


def test_parser_collects_repeated_flags():
    args = build_parser().parse_args(['admissibility', '--window', '0.1', '--window', '1', '--probes', '8'])
    assert args.param_windows == [0.1, 1.0]
    assert args.param_random_probes == 8
    assert args.param_modes is None
    assert not hasattr(args, 'seed')


@pytest.mark.parametrize('argv', [['maxreg', '--modes', '8', '--ensemble', '2', '--seed', '1'],
                                  ['trace-bound', '--modes', '8', '--T', '0.25', '--samples', '2', '--seed', '1'],
                                  ['boundary', '--modes', '8', '--T', '0.1', '--paths', '2'],
                                  ['solve', '--modes', '8', '--T', '0.1', '--solver', 'both']])
def test_sidecar_checks_are_plain_json(argv, tmp_path):
    out = tmp_path / 'run.csv'
    assert main(argv + ['--out', str(out)]) == EXIT_OK
    meta = json.loads((tmp_path / 'run.csv.meta.json').read_text())
    assert meta['status'] == 'ok'
    assert meta['checks']
    for check in meta['checks']:
        assert check['passed'] is None or isinstance(check['passed'], bool), check


def test_solver_disagreement_is_reported_in_the_sidecar(tmp_path):
    out = tmp_path / 'coarse.csv'
    argv = ['solve', '--modes', '16', '--T', '0.5', '--dt', '0.05', '--solver', 'both', '--kernel', 'exp:50,1',
            '--out', str(out)]
    assert main(argv) == EXIT_OK
    checks = {check['name']: check for check in json.loads((tmp_path / 'coarse.csv.meta.json').read_text())['checks']}
    agreement = checks['cross-solver agreement']
    assert agreement['passed'] is False
    assert agreement['max_distance'] > agreement['threshold']


@pytest.mark.parametrize('scenario', [['maxreg', '--modes', '4', '--ensemble', '1', '--T', '0.05'],
                                      ['trace-bound', '--modes', '4', '--T', '0.05', '--samples', '1']])
def test_missing_seed_is_logged_for_ensembles(scenario, caplog):
    with caplog.at_level(logging.WARNING, logger='volterraveritas.harness.cli'):
        assert main(scenario) == EXIT_OK
    assert 'no --seed was given' in caplog.text
    caplog.clear()
    with caplog.at_level(logging.WARNING, logger='volterraveritas.harness.cli'):
        assert main(scenario + ['--seed', '4']) == EXIT_OK
    assert 'no --seed was given' not in caplog.text


def test_seed_from_the_config_file_is_not_reported(tmp_path, caplog):
    config = tmp_path / 'run.json'
    config.write_text(json.dumps({'scenario': 'trace-bound', 'seed': 2, 'params': {'modes': 4, 'T': 0.05,
                                                                                  'samples': 1}}))
    with caplog.at_level(logging.WARNING, logger='volterraveritas.harness.cli'):
        assert main(['trace-bound', '--config', str(config)]) == EXIT_OK
    assert 'no --seed was given' not in caplog.text
