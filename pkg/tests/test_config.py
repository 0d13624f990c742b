"""Tests for run configuration: defaults, files and flag overrides."""

from fractions import Fraction

import pytest

from config import settings
from config.lab_config import Config, parse_config, read_config_file
from core.errors import ConfigError


def _write(tmp_path, text):
    path = tmp_path / 'lab.cfg'
    path.write_text(text)
    return str(path)


def test_defaults():
    config = parse_config()
    assert config.lam == Fraction(2)
    assert config.lift == 'std'
    assert config.escape == 'log-plain'
    assert config.n_max == settings.DEFAULT_N_MAX
    assert config.to_dict()['lambda'] == '2'


def test_file_values(tmp_path):
    path = _write(tmp_path, 'lambda = -3/2\nP = 50\nn-max = 6   # depth\n\n# comment line\n')
    config = parse_config(path)
    assert config.lam == Fraction(-3, 2)
    assert config.prime_bound == 50
    assert config.n_max == 6


def test_flags_override_file(tmp_path):
    path = _write(tmp_path, 'lambda = 3\nseed = 11\n')
    config = parse_config(path, {'lam': '5/2', 'seed': None})
    assert config.lam == Fraction(5, 2)
    assert config.seed == 11


@pytest.mark.parametrize('text', ['lambda = 1\n', 'lambda = -1\n', 'lambda = 0\n'])
def test_excluded_lambda(tmp_path, text):
    with pytest.raises(ConfigError):
        parse_config(_write(tmp_path, text))


def test_depth_cap():
    with pytest.raises(ConfigError):
        parse_config(overrides={'n_max': 12})


@pytest.mark.parametrize('overrides', [
    {'lift': 'fancy'},
    {'escape': 'log'},
    {'grid': 16},
    {'tol': 0},
    {'P': 1},
])
def test_invalid_values(overrides):
    with pytest.raises(ConfigError):
        parse_config(overrides=overrides)


def test_unknown_key(tmp_path):
    with pytest.raises(ConfigError, match='unknown configuration key'):
        parse_config(_write(tmp_path, 'depth = 3\n'))


def test_malformed_value(tmp_path):
    with pytest.raises(ConfigError, match='malformed value'):
        parse_config(_write(tmp_path, 'seed = seven\n'))
    with pytest.raises(ConfigError):
        parse_config(_write(tmp_path, 'lambda = 0.5\n'))


def test_malformed_line(tmp_path):
    with pytest.raises(ConfigError, match='expected'):
        read_config_file(_write(tmp_path, 'just words\n'))


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match='not found'):
        parse_config(str(tmp_path / 'absent.cfg'))


def test_cache_from_environment(monkeypatch, tmp_path):
    monkeypatch.setenv('HEIGHTLAB_CACHE', str(tmp_path / 'elsewhere'))
    assert parse_config().cache_dir == str(tmp_path / 'elsewhere')


def test_from_dict_typed_values():
    config = Config.from_dict({'lambda': Fraction(3), 'n-max': '4', 'tol': '1e-9'})
    assert config.n_max == 4
    assert config.tol == 1e-9
