import json

import numpy as np
import pytest

from flab.config import DFLT_CONFIG, env_config, read_config_file, resolve_config
from flab.util import (
    CapacityError,
    FlabError,
    make_rng,
    map_trials,
    resolve_seed,
    trial_seed,
    write_json,
)


def _square(trial):
    return trial * trial


def _normal_draw(trial):
    return float(make_rng(3, 'increments', trial).normal())


@pytest.fixture
def config_filepath(tmp_path):
    filepath = tmp_path / 'flab.ini'
    filepath.write_text(
        '[flab]\nseed = 3\neta = 0.02\n\n'
        '[frontier]\neps = 0.001\n\n'
        '[experiment:surround-c0]\ntrials = 50\nregimes = ("core",)\n'
    )
    return str(filepath)


def test_config_sections(config_filepath):
    assert read_config_file(config_filepath) == {'seed': 3, 'eta': 0.02}
    assert read_config_file(config_filepath, 'frontier')['eps'] == 0.001
    cfg = read_config_file(config_filepath, 'experiment:surround-c0')
    assert cfg['trials'] == 50
    assert cfg['regimes'] == ('core',)


def test_config_precedence(config_filepath):
    environ = {'FRONTIERLAB_SEED': '8', 'FRONTIERLAB_MAX_CELLS': '1000'}
    cfg = resolve_config(environ=environ)
    assert (cfg['seed'], cfg['max_cells']) == (8, 1000)
    cfg = resolve_config(config_filepath=config_filepath, environ=environ)
    assert (cfg['seed'], cfg['max_cells']) == (3, 1000)
    cfg = resolve_config({'seed': 4, 'eta': None}, config_filepath, environ=environ)
    assert (cfg['seed'], cfg['eta']) == (4, 0.02)
    cfg = resolve_config(environ={}, defaults={'trials': 7, 'eta': 0.5})
    assert (cfg['trials'], cfg['eta'], cfg['r']) == (7, 0.5, DFLT_CONFIG['r'])


def test_env_config_ignores_other_variables():
    assert env_config({'HOME': '/root', 'FRONTIERLAB_MAX_GENERATION': '6'}) == {'max_generation': 6}


def test_trial_seeds_are_stable():
    assert trial_seed(0, 0) == trial_seed(0, 0)
    seeds = {trial_seed(1, t) for t in range(1000)}
    assert len(seeds) == 1000
    assert all(0 <= s < 2 ** 64 for s in seeds)


def test_make_rng_streams():
    assert make_rng(1, 'walk').integers(10 ** 9) == make_rng(1, 'walk').integers(10 ** 9)
    with pytest.raises(ValueError):
        make_rng(1, 'no-such-stream')


def test_resolve_seed(monkeypatch):
    monkeypatch.delenv('FRONTIERLAB_SEED', raising=False)
    assert resolve_seed() == 0
    monkeypatch.setenv('FRONTIERLAB_SEED', '12')
    assert resolve_seed() == 12
    assert resolve_seed(3) == 3


def test_map_trials_does_not_depend_on_jobs():
    assert map_trials(_square, 10) == [t * t for t in range(10)]
    assert map_trials(_normal_draw, 25, jobs=3) == map_trials(_normal_draw, 25, jobs=1)
    assert map_trials(_square, 0) == []


def test_write_json_is_deterministic(tmp_path):
    obj = {'b': np.float64(0.5), 'a': np.arange(3), 'c': (1 + 2j), 'd': np.bool_(True)}
    first = write_json(obj, str(tmp_path / 'x' / 'first.json'))
    second = write_json(dict(reversed(list(obj.items()))), str(tmp_path / 'second.json'))
    with open(first) as fp:
        text = fp.read()
    with open(second) as fp:
        assert fp.read() == text
    assert json.loads(text) == {'a': [0, 1, 2], 'b': 0.5, 'c': [1.0, 2.0], 'd': True}


def test_errors_are_value_errors():
    assert issubclass(CapacityError, FlabError)
    assert issubclass(FlabError, ValueError)
