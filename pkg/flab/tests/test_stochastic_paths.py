import warnings

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from scipy import stats

from flab.gosper_tiling import ORIGIN_TILE
from flab.stochastic_paths import (
    prefix,
    read_frames,
    reversed_path,
    sample_bm,
    sample_bridge,
    sample_killed,
    sample_srw,
    scaled,
    to_dataframe,
    translated,
    truncate_at_exit,
    write_csv,
    write_frames,
)


def test_same_seed_same_path():
    assert_array_equal(sample_bm(500, 1e-3, seed=4).points, sample_bm(500, 1e-3, seed=4).points)
    assert not np.array_equal(sample_bm(500, 1e-3, seed=4).points, sample_bm(500, 1e-3, seed=5).points)


def test_prefix_property():
    long = sample_bm(1000, 1e-4, seed=9)
    assert_array_equal(prefix(long, 300).points, sample_bm(300, 1e-4, seed=9).points)


def test_increment_variance():
    dt = 1e-2
    path = sample_bm(200_000, dt, seed=0)
    inc = np.diff(path.points, axis=0)
    assert_allclose(inc.var(axis=0), [dt, dt], rtol=0.02)
    assert_allclose(inc.mean(axis=0), [0, 0], atol=5 * np.sqrt(dt / 200_000))


def test_killed_path_length_matches_kill_time():
    path = sample_killed(10 ** 6, 1e-4, seed=2)
    assert not path.truncated
    assert path.n_steps == int(np.floor(path.kill_time / 1e-4))


def test_killed_path_truncation_warns():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter('always')
        path = sample_killed(10, 1e-4, seed=2)
    assert path.truncated
    assert path.n_steps == 10
    assert any('truncated' in str(w.message) for w in caught)


def test_kill_time_is_exponential():
    times = np.array([sample_killed(1, 1.0, seed=s).kill_time for s in range(2000)])
    assert_allclose(times.mean(), 1.0, atol=0.1)
    assert stats.kstest(times, 'expon').pvalue > 1e-3


def test_bridge_is_closed():
    bridge = sample_bridge(1000, seed=1)
    assert_array_equal(bridge.points[0], [0, 0])
    assert_array_equal(bridge.points[-1], [0, 0])
    assert bridge.kind == 'bridge'


def test_srw_steps_are_unit():
    walk = sample_srw(1000, seed=3)
    assert walk.points.dtype == np.int64
    assert_array_equal(np.abs(np.diff(walk.points, axis=0)).sum(axis=1), np.ones(1000))


def test_invalid_arguments():
    with pytest.raises(ValueError):
        sample_bm(0)
    with pytest.raises(ValueError):
        sample_bm(10, dt=-1.0)
    with pytest.raises(ValueError):
        scaled(sample_srw(5), 2.0)


def test_truncate_at_exit():
    path = translated(sample_bm(20_000, 1e-4, seed=5), (0.1, 0.0))
    assert_allclose(path.points[0], [0.1, 0.0])
    stopped = truncate_at_exit(path, ORIGIN_TILE)
    inside = ORIGIN_TILE.contains(stopped.points[:-1])
    assert np.all(inside)
    if len(stopped) < len(path):
        assert not ORIGIN_TILE.contains(stopped.points[-1])


def test_truncate_with_a_predicate():
    path = sample_bm(5000, 1e-3, seed=6)

    def in_disk(pts):
        return np.hypot(pts[:, 0], pts[:, 1]) < 0.5

    stopped = truncate_at_exit(path, in_disk)
    assert in_disk(stopped.points[:-1]).all()


def test_reversal_and_scaling():
    path = sample_bm(100, 1e-2, seed=7)
    rev = reversed_path(path)
    assert_array_equal(rev.points[0], [0, 0])
    assert_allclose(rev.points[-1], -path.points[-1])
    big = scaled(path, 3.0)
    assert_allclose(big.points, 3 * path.points)
    assert big.dt == pytest.approx(9 * path.dt)


def _bridge_of(path):
    """``X(t) - t X(1)`` for a path sampled on [0, 1]"""
    t = path.times[:, None]
    return path.points - t * path.points[-1]


def _max_norm(points):
    return float(np.abs(points).max())


def test_bridge_variance_at_one_half():
    middle = np.array([sample_bridge(100, seed=s).points[50] for s in range(10 ** 4)])
    assert_allclose(middle.var(axis=0), [0.25, 0.25], atol=0.02)


def test_bridge_of_reversed_path_is_reversed_bridge():
    path = sample_bm(400, 1 / 400, seed=12)
    assert_allclose(_bridge_of(reversed_path(path)), sample_bridge(400, seed=12).points[::-1], atol=1e-12)


@pytest.mark.slow
def test_reversal_keeps_the_bridge_law():
    n, n_paths = 200, 10 ** 4
    direct = [_max_norm(sample_bridge(n, seed=s).points) for s in range(n_paths)]
    reverse = [
        _max_norm(_bridge_of(reversed_path(sample_bm(n, 1 / n, seed=s))))
        for s in range(n_paths, 2 * n_paths)
    ]
    assert stats.ks_2samp(direct, reverse).statistic < 0.03


def test_srw_mean_square_displacement():
    n = 10 ** 3
    ends = np.array([sample_srw(n, seed=s).points[-1] for s in range(10 ** 4)])
    assert_allclose((ends.astype(float) ** 2).sum(axis=1).mean(), n, rtol=0.03)


def test_csv_export(tmp_path):
    path = sample_bm(10, 0.5, seed=0)
    df = to_dataframe(path)
    assert list(df.columns) == ['t', 'x', 'y']
    assert_allclose(df['t'], 0.5 * np.arange(11))
    write_csv(path, str(tmp_path / 'p.csv'))
    assert (tmp_path / 'p.csv').read_text().splitlines()[0] == 't,x,y'


@pytest.mark.parametrize('path', [sample_killed(10 ** 5, 1e-3, seed=8), sample_srw(50, seed=8)])
def test_frames_round_trip(tmp_path, path):
    back = read_frames(write_frames(path, str(tmp_path / 'p.frames')))
    assert_array_equal(back.points, path.points)
    assert back.points.dtype == path.points.dtype
    assert (back.kind, back.dt, back.seed, back.kill_time) == (path.kind, path.dt, path.seed, path.kill_time)
