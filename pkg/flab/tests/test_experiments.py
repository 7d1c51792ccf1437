import json
import math

import pytest

from flab.config import resolve_config
from flab.experiments import EXPERIMENT_DEFAULTS, EXPERIMENTS, PRUNING_BOUND, run_experiment


def experiment_config(name, **overrides):
    return resolve_config(overrides, environ={}, defaults=EXPERIMENT_DEFAULTS[name])


def test_every_experiment_has_defaults():
    assert set(EXPERIMENTS) == set(EXPERIMENT_DEFAULTS)


def test_tst_circle(tmp_path):
    cfg = experiment_config('tst-circle', n_points=500, j_max=5, r_list=(0.5, 0.1))
    report, outputs = run_experiment('tst-circle', cfg, str(tmp_path))
    assert report['experiment'] == 'tst-circle'
    assert report['sum'] >= report['diam'] == pytest.approx(2.0)
    assert report['estimate'] == pytest.approx(report['sum'] / (2 * math.pi))
    assert report['floors']['0.1'] > report['floors']['0.5']
    with open(tmp_path / 'tst-circle.json') as fp:
        assert json.load(fp)['j_max'] == 5
    assert len(outputs) == 2


def test_frontier_dim_small(tmp_path):
    cfg = experiment_config('frontier-dim', seeds=2, steps=20_000, eps_max=0.3, eps_min=0.005, n_scales=6)
    report, _ = run_experiment('frontier-dim', cfg, str(tmp_path))
    assert report['n_trials'] == 2
    assert 1.0 < report['estimate'] < 1.7
    assert (tmp_path / 'frontier-dim.csv').exists()


def test_srw_exponent_small(tmp_path):
    cfg = experiment_config('srw-exponent', ns=(64, 256, 1024, 4096), walks=10)
    report, _ = run_experiment('srw-exponent', cfg, str(tmp_path))
    assert 0.3 < report['estimate'] < 1.0
    assert report['n_trials'] == 40


def test_unknown_experiment(tmp_path):
    with pytest.raises(KeyError):
        run_experiment('no-such-experiment', experiment_config('tst-circle'), str(tmp_path))


@pytest.mark.slow
def test_frontier_dim_full_size(tmp_path):
    report, _ = run_experiment('frontier-dim', experiment_config('frontier-dim', jobs=8), str(tmp_path))
    assert 1.20 <= report['estimate'] <= 1.45
    assert report['min_r2'] >= 0.99
    assert report['above_one']


@pytest.mark.slow
def test_bridge_frontier_is_above_one(tmp_path):
    cfg = experiment_config('bridge-frontier', seeds=5, steps=10 ** 5, jobs=4)
    report, _ = run_experiment('bridge-frontier', cfg, str(tmp_path))
    assert report['estimate'] > 1.0


@pytest.mark.slow
def test_srw_exponent_full_size(tmp_path):
    report, _ = run_experiment('srw-exponent', experiment_config('srw-exponent', jobs=8), str(tmp_path))
    assert 0.55 <= report['estimate'] <= 0.75
    assert report['above_half']


@pytest.mark.slow
def test_surround_c0(tmp_path):
    report, _ = run_experiment('surround-c0', experiment_config('surround-c0', jobs=8), str(tmp_path))
    for regime in ('core', 'origin'):
        assert report['regimes'][regime]['ci_excludes_zero']


@pytest.mark.slow
def test_whitney_growth(tmp_path):
    cfg = experiment_config('whitney-growth', jobs=5)
    report, _ = run_experiment('whitney-growth', cfg, str(tmp_path))
    assert report['n_trials'] == 5
    assert report['level_gap_violations'] == 0
    assert report['sibling_overlaps'] == 0
    assert report['max_pruning_ratio'] <= PRUNING_BOUND
