import json
import os

import pytest

from flab.cli import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, RunManifest, main
from flab.gosper_tiling import current_max_generation


def read_manifest(dirpath) -> RunManifest:
    return RunManifest.read(os.path.join(str(dirpath), 'manifest.json'))


def test_path_command(tmp_path):
    assert main(['--out', str(tmp_path), 'path', '--steps', '100']) == EXIT_OK
    for filename in ('path.csv', 'path.frames', 'path.svg', 'manifest.json'):
        assert (tmp_path / filename).exists()
    manifest = read_manifest(tmp_path)
    assert manifest.command == 'path'
    assert manifest.seed == 0
    assert manifest.params['steps'] == 100
    assert set(manifest.versions) >= {'flab', 'constants', 'numpy'}
    assert len(manifest.outputs) == 3


def test_rerun_gives_identical_outputs(tmp_path):
    first, second = tmp_path / 'first', tmp_path / 'second'
    assert main(['--out', str(first), '--seed', '11', 'path', '--kind', 'killed', '--steps', '5000',
                 '--dt', '1e-3']) == EXIT_OK
    assert main(['--out', str(second), 'rerun', str(first / 'manifest.json')]) == EXIT_OK
    assert read_manifest(second).seed == 11
    for filename in ('path.csv', 'path.frames', 'path.svg'):
        assert (first / filename).read_bytes() == (second / filename).read_bytes(), filename


def test_tiling_svg_is_deterministic(tmp_path):
    args = ['tiling', '--level', '1', '--generation', '2', '--window', '-0.5', '0.5', '-0.5', '0.5']
    assert main(['--out', str(tmp_path / 'a')] + args) == EXIT_OK
    assert main(['--out', str(tmp_path / 'b')] + args) == EXIT_OK
    assert (tmp_path / 'a' / 'tiling.svg').read_bytes() == (tmp_path / 'b' / 'tiling.svg').read_bytes()
    with open(tmp_path / 'a' / 'tiling_constants.json') as fp:
        constants = json.load(fp)
    assert constants['d0'] > 0 and constants['eta0'] > 0


def test_frontier_command(tmp_path):
    assert main(['--out', str(tmp_path), 'frontier', '--steps', '2000', '--dt', '1e-3', '--eps', '0.01']) == EXIT_OK
    for filename in ('frontier.pbm', 'frontier.pbm.json', 'frontier_stats.csv', 'frontier.svg'):
        assert (tmp_path / filename).exists()
    header = (tmp_path / 'frontier_stats.csv').read_text().splitlines()[0].split(',')
    assert {'cells', 'frontier_cells', 'hole_count'} <= set(header)


def test_beta_command(tmp_path, capsys):
    assert main(['--out', str(tmp_path), 'beta', '--steps', '500', '--j-max', '4']) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report['sum'] >= report['diam'] > 0
    assert (tmp_path / 'beta_atlas.csv').exists()


def test_stats_extinction(tmp_path, capsys):
    assert main(['--out', str(tmp_path), 'stats', 'extinction', '--trials', '20000']) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert abs(report['estimate'] - 1 / 3) < 1e-10
    assert abs(report['simulated'] - 1 / 3) < 0.02
    assert (tmp_path / 'stats-extinction.json').exists()
    assert (tmp_path / 'stats-extinction.csv').exists()


def test_stats_percolation_edge_mode(tmp_path, capsys):
    argv = ['--out', str(tmp_path), 'stats', 'percolation', '--trials', '200', '--set', 'mode=edge']
    assert main(argv) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report['params']['mode'] == 'edge'
    assert report['oracle'] == pytest.approx(5 / 9)


def test_config_file_and_flags(tmp_path):
    config_filepath = tmp_path / 'flab.ini'
    config_filepath.write_text('[flab]\nseed = 5\n\n[path]\nsteps = 50\n')
    out = tmp_path / 'out'
    assert main(['--config', str(config_filepath), '--out', str(out), 'path']) == EXIT_OK
    manifest = read_manifest(out)
    assert (manifest.seed, manifest.params['steps']) == (5, 50)
    assert main(['--config', str(config_filepath), '--out', str(out), '--seed', '7', 'path']) == EXIT_OK
    assert read_manifest(out).seed == 7


def test_seed_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv('FRONTIERLAB_SEED', '9')
    assert main(['--out', str(tmp_path), 'path', '--steps', '10']) == EXIT_OK
    assert read_manifest(tmp_path).seed == 9


def test_usage_errors(tmp_path):
    out = ['--out', str(tmp_path)]
    assert main(out + ['experiment', 'no-such-experiment']) == EXIT_USAGE
    assert main(out + ['stats', 'no-such-stat']) == EXIT_USAGE
    assert main(out + ['path', '--kind', 'levy']) == EXIT_USAGE
    assert main(out + ['path', '--steps', '0']) == EXIT_USAGE
    assert main(out + ['--set', 'oops', 'path']) == EXIT_USAGE
    assert main([]) == EXIT_USAGE


def test_capacity_failure_exits_with_one(tmp_path):
    argv = ['--out', str(tmp_path), '--set', 'max_cells=10', 'frontier', '--steps', '1000', '--eps', '0.001']
    assert main(argv) == EXIT_FAILURE


def test_root_too_coarse_is_a_numeric_failure(tmp_path, capsys):
    argv = ['--out', str(tmp_path), 'whitney', '--steps', '2000', '--eps', '0.05', '--level', '-8', '--depth', '1']
    assert main(argv) == EXIT_FAILURE
    assert 'usage error' not in capsys.readouterr().err


def test_max_generation_from_flags(tmp_path):
    before = current_max_generation()
    argv = ['--out', str(tmp_path), '--set', 'max_generation=3', 'tiling', '--level', '1', '--generation', '4']
    assert main(argv) == EXIT_FAILURE
    assert current_max_generation() == before


def test_max_generation_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv('FRONTIERLAB_MAX_GENERATION', '3')
    argv = ['--out', str(tmp_path), 'tiling', '--level', '1', '--generation', '4']
    assert main(argv) == EXIT_FAILURE
    monkeypatch.delenv('FRONTIERLAB_MAX_GENERATION')
    assert main(argv) == EXIT_OK
