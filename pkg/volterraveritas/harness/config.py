from __future__ import annotations
from dataclasses import dataclass, field
from json import dumps, load, loads
from pathlib import Path
from typing import Dict, Optional
import logging

from volterraveritas.utils.errors import ValidationError
from volterraveritas.utils.utils import str_missing_key

logger = logging.getLogger(__name__)

TOP_LEVEL_KEYS = ('scenario', 'seed', 'out', 'tol', 'params')


@dataclass(frozen=True)
class ExperimentConfig:
    """One fully resolved experiment. Class properties are pulled in from the config directory and act as
    the per-scenario defaults every config is checked against.

    Args:
        scenario (str): subcommand name, a key of config/experiments.json.
        params (dict): scenario parameters; each must be a known key of that scenario.
        seed (int): seed of every random draw the scenario makes.
        out (str): CSV path, None for stdout.
        tol (float): quadrature tolerance.

    Attributes:
        defaults (dict): contents of config/experiments.json.
    """
    config_filepath = Path(Path(__file__).parents[2], 'config', 'experiments.json')
    with open(config_filepath, 'r') as config_file:
        defaults = load(config_file)

    scenario: str
    params: Dict = field(default_factory=dict)
    seed: int = 0
    out: Optional[str] = None
    tol: float = 1e-8

    def __post_init__(self):
        if self.scenario not in ExperimentConfig.defaults:
            raise ValidationError(f'unknown scenario {self.scenario!r}, expected one of '
                                  f'{", ".join(sorted(ExperimentConfig.defaults))}', 'scenario')
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            raise ValidationError(f'must be a nonnegative integer, got {self.seed!r}', 'seed')
        if isinstance(self.tol, bool) or not isinstance(self.tol, (int, float)) or not 0.0 < self.tol < 1.0:
            raise ValidationError(f'must lie in (0, 1), got {self.tol!r}', 'tol')
        if self.out is not None and not isinstance(self.out, str):
            raise ValidationError(f'must be a path string, got {self.out!r}', 'out')
        object.__setattr__(self, 'tol', float(self.tol))
        object.__setattr__(self, 'params', self._resolve(self.params))

    def _resolve(self, overrides: Dict) -> Dict:
        """Defaults of the scenario updated with overrides, each coerced to its default's type."""
        defaults = ExperimentConfig.defaults[self.scenario]
        resolved = dict(defaults)
        for key, value in overrides.items():
            if key not in defaults:
                raise ValidationError(f'unknown parameter for scenario {self.scenario!r}', key)
            resolved[key] = _coerce(key, value, defaults[key])
        # normalise to what JSON gives back so that parse(render(c)) == c
        return loads(dumps(resolved))

    @classmethod
    def build(cls, scenario: str, file_values: Optional[Dict] = None, overrides: Optional[Dict] = None,
              **top_level) -> ExperimentConfig:
        """
        Layers scenario defaults, a config file's values and command line overrides; later layers win.

        Args:
            scenario: subcommand name.
            file_values: parsed --config file, same shape as render() output.
            overrides: parameter values given as flags.
            **top_level: seed, out and tol given as flags; None values are ignored.
        """
        file_values = dict(file_values or {})
        unknown = set(file_values) - set(TOP_LEVEL_KEYS)
        if unknown:
            raise ValidationError('unknown config key', sorted(unknown)[0])
        if file_values.get('scenario', scenario) != scenario:
            raise ValidationError(f'config file is for {file_values["scenario"]!r}, command is {scenario!r}',
                                  'scenario')
        params = dict(file_values.get('params') or {})
        params.update({k: v for k, v in (overrides or {}).items() if v is not None})
        values = {k: file_values[k] for k in ('seed', 'out', 'tol') if k in file_values}
        values.update({k: v for k, v in top_level.items() if v is not None})
        return cls(scenario, params, **values)

    @classmethod
    def read_file(cls, filepath) -> Dict:
        """Reads a --config JSON file into the dict build() takes as file_values."""
        try:
            with open(filepath, 'r') as config_file:
                data = load(config_file)
        except OSError as error:
            raise ValidationError(f'cannot read {filepath}: {error.strerror}', 'config') from error
        except ValueError as error:
            raise ValidationError(f'{filepath} is not valid JSON: {error}', 'config') from error
        if not isinstance(data, dict):
            raise ValidationError(f'{filepath} must hold a JSON object', 'config')
        return data

    def render(self) -> str:
        return dumps({'scenario': self.scenario, 'seed': self.seed, 'out': self.out, 'tol': self.tol,
                      'params': self.params}, indent=2, sort_keys=True)

    @classmethod
    def parse(cls, text: str) -> ExperimentConfig:
        try:
            data = loads(text)
        except ValueError as error:
            raise ValidationError(f'not valid JSON: {error}', 'config') from error
        if not isinstance(data, dict):
            raise ValidationError('config must be a JSON object', 'config')
        unknown = set(data) - set(TOP_LEVEL_KEYS)
        if unknown:
            raise ValidationError('unknown config key', sorted(unknown)[0])
        try:
            scenario = data['scenario']
        except KeyError as error:
            raise ValidationError('required key is missing', str_missing_key(error)) from error
        return cls(scenario, data.get('params') or {}, data.get('seed', 0), data.get('out'), data.get('tol', 1e-8))

    def __getitem__(self, key: str):
        try:
            return self.params[key]
        except KeyError as error:
            raise ValidationError(f'scenario {self.scenario!r} has no such parameter', str_missing_key(error)) \
                from error


def _coerce(key: str, value, default):
    """Coerces a flag or JSON value to the type of its default."""
    if isinstance(default, bool):
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ('1', 'true', 'yes', '0', 'false', 'no'):
            return value.lower() in ('1', 'true', 'yes')
        raise ValidationError(f'expected a boolean, got {value!r}', key)
    if isinstance(default, list):
        items = value if isinstance(value, (list, tuple)) else [value]
        if not default:
            return list(items)
        return [_coerce(key, item, default[0]) for item in items]
    if isinstance(default, int):
        if isinstance(value, bool):
            raise ValidationError(f'expected an integer, got {value!r}', key)
        try:
            number = float(value)
        except (TypeError, ValueError) as error:
            raise ValidationError(f'expected an integer, got {value!r}', key) from error
        if not number.is_integer():
            raise ValidationError(f'expected an integer, got {value!r}', key)
        return int(number)
    if isinstance(default, float):
        if isinstance(value, bool):
            raise ValidationError(f'expected a number, got {value!r}', key)
        try:
            return float(value)
        except (TypeError, ValueError) as error:
            raise ValidationError(f'expected a number, got {value!r}', key) from error
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ValidationError(f'expected a string, got {value!r}', key)
        return value
    return value
