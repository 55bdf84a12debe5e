import json

import pytest

from volterraveritas.harness import ExperimentConfig, scenario_names
from volterraveritas.utils.errors import ValidationError


def test_every_scenario_has_defaults():
    assert set(ExperimentConfig.defaults) == set(scenario_names())
    for scenario in scenario_names():
        config = ExperimentConfig(scenario)
        assert config.params == ExperimentConfig.defaults[scenario]
        assert config.seed == 0 and config.out is None and config.tol == 1e-8


def test_acceptance_defaults():
    config = ExperimentConfig('solve')
    assert config['modes'] == 64
    assert config['kernel'] == 'exp:1,1'
    assert config['dt'] == 1e-3
    assert ExperimentConfig('maxreg')['T'] == 0.25


def test_unknown_parameter_names_the_field():
    with pytest.raises(ValidationError) as caught:
        ExperimentConfig('solve', {'mode': 8})
    assert caught.value.field == 'mode'
    with pytest.raises(ValidationError) as caught:
        ExperimentConfig('solve')['knorm']
    assert caught.value.field == 'knorm'


@pytest.mark.parametrize('kwargs', [{'scenario': 'heat'}, {'scenario': 'solve', 'seed': -1},
                                    {'scenario': 'solve', 'seed': True}, {'scenario': 'solve', 'tol': 0.0},
                                    {'scenario': 'solve', 'out': 3}])
def test_rejects_top_level_values(kwargs):
    with pytest.raises(ValidationError):
        ExperimentConfig(**kwargs)


def test_values_are_coerced_to_the_default_type():
    config = ExperimentConfig('solve', {'modes': '16', 'alpha': '0.25', 'T': 2})
    assert config['modes'] == 16 and isinstance(config['modes'], int)
    assert config['alpha'] == 0.25
    assert isinstance(config['T'], float)
    assert ExperimentConfig('lemma4', {'R': 2.0, 'optimize_alpha': 'yes'}).params['R'] == [2.0]
    assert ExperimentConfig('lemma4', {'optimize_alpha': 'yes'})['optimize_alpha'] is True


@pytest.mark.parametrize('params', [{'modes': 1.5}, {'modes': 'many'}, {'modes': True}, {'alpha': 'half'},
                                    {'kernel': 3}, {'optimize_alpha': 'maybe'}])
def test_coercion_failures(params):
    scenario = 'lemma4' if 'optimize_alpha' in params else 'solve'
    with pytest.raises(ValidationError) as caught:
        ExperimentConfig(scenario, params)
    assert caught.value.field == next(iter(params))


def test_render_parse_round_trip():
    config = ExperimentConfig('bergman', {'q': [3.0], 'kernels': ['exp:2,1']}, seed=4, out='norms.csv', tol=1e-9)
    assert ExperimentConfig.parse(config.render()) == config
    assert json.loads(config.render())['params']['theta'] == ExperimentConfig.defaults['bergman']['theta']


@pytest.mark.parametrize('text, field', [('[1, 2]', 'config'), ('{"params": {}}', 'scenario'),
                                         ('{"scenario": "solve", "colour": 1}', 'colour'), ('{', 'config')])
def test_parse_rejects(text, field):
    with pytest.raises(ValidationError) as caught:
        ExperimentConfig.parse(text)
    assert caught.value.field == field


def test_flags_override_the_file_which_overrides_the_defaults(tmp_path):
    path = tmp_path / 'run.json'
    path.write_text(json.dumps({'scenario': 'solve', 'seed': 3, 'tol': 1e-6, 'params': {'modes': 8, 'T': 0.5}}))
    file_values = ExperimentConfig.read_file(path)
    config = ExperimentConfig.build('solve', file_values, {'modes': 16, 'alpha': None}, seed=None, tol=1e-7)
    assert config['modes'] == 16
    assert config['T'] == 0.5
    assert config['alpha'] == 0.5
    assert config.seed == 3
    assert config.tol == 1e-7


def test_build_rejects_mismatched_files():
    with pytest.raises(ValidationError) as caught:
        ExperimentConfig.build('solve', {'scenario': 'maxreg'})
    assert caught.value.field == 'scenario'
    with pytest.raises(ValidationError) as caught:
        ExperimentConfig.build('solve', {'modes': 8})
    assert caught.value.field == 'modes'


def test_read_file_errors(tmp_path):
    with pytest.raises(ValidationError):
        ExperimentConfig.read_file(tmp_path / 'missing.json')
    broken = tmp_path / 'broken.json'
    broken.write_text('{"scenario": ')
    with pytest.raises(ValidationError):
        ExperimentConfig.read_file(broken)
    listing = tmp_path / 'list.json'
    listing.write_text('[]')
    with pytest.raises(ValidationError):
        ExperimentConfig.read_file(listing)
