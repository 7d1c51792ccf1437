import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from flab.gosper_tiling import ABS_LAMBDA, TileAddress, blow_up
from flab.tst_beta import (
    Box,
    DyadicSquare,
    beta,
    beta_bruteforce,
    curve_length_floor,
    dyadic_squares_meeting,
    minimal_width,
    set_diameter,
    tiles_with_blow_up_meeting,
    tst_sum,
    wiggliness_candidates,
    wiggliness_score,
)
from flab.util import CapacityError

UNIT = Box(0, 1, 0, 1)


def test_hull_beta_matches_line_search():
    rng = np.random.default_rng(0)
    for _ in range(200):
        n = rng.integers(3, 30)
        pts = rng.uniform(0, 1, size=(n, 2))
        assert abs(beta(pts, UNIT) - beta_bruteforce(pts, UNIT)) < 1e-6


@pytest.mark.slow
def test_hull_beta_matches_line_search_on_a_thousand_instances():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        n = rng.integers(3, 50)
        pts = rng.normal(0.5, 0.2, size=(n, 2))
        assert abs(beta(pts, UNIT) - beta_bruteforce(pts, UNIT)) < 1e-6


def test_collinear_points_have_zero_beta():
    t = np.linspace(0, 1, 17)
    assert beta(np.column_stack([t, 0.3 * t + 0.2]), UNIT) == 0.0
    assert beta([(0.5, 0.5)], UNIT) == 0.0
    assert minimal_width([(0, 0), (2, 2), (5, 5), (1, 1)]) == 0.0


def test_points_outside_are_ignored():
    pts = [(0.1, 0.1), (0.9, 0.1), (0.5, 0.1), (5.0, 5.0)]
    assert beta(pts, UNIT) == 0.0


def test_minimal_width_of_a_triangle():
    # the smallest height of the 3-4-5 triangle is 12 / 5
    assert_allclose(minimal_width([(0, 0), (4, 0), (0, 3)]), 12 / 5)


def test_beta_on_a_tile_blow_up():
    G = TileAddress(0, 0, 0)
    S = blow_up(G, 2.0)
    pts = [(0, 0), (0.1, 0), (0, 0.1)]
    assert beta(pts, S) == pytest.approx(minimal_width(pts) / 2 / S.diam)


def test_tst_sum_of_a_segment_is_its_diameter():
    for pts in ([(t, 0.0) for t in np.linspace(0, 1, 100)],
                [(2 + 3 * t, -1 + 4 * t) for t in np.linspace(0, 1, 64)]):
        atlas = tst_sum(pts, 7)
        assert atlas.sum == set_diameter(pts)
        assert all(b == 0.0 for b in atlas.entries.values())


def test_tst_sum_is_translation_and_scale_covariant():
    rng = np.random.default_rng(3)
    pts = rng.uniform(0, 1, size=(200, 2))
    a = tst_sum(pts, 5)
    b = tst_sum(pts * 3 + (10, -7), 5)
    assert_allclose(b.sum, 3 * a.sum, rtol=1e-9)


def test_tst_sum_grows_with_depth():
    rng = np.random.default_rng(4)
    pts = rng.uniform(0, 1, size=(300, 2))
    sums = [tst_sum(pts, j).sum for j in range(0, 6)]
    assert all(a <= b for a, b in zip(sums[:-1], sums[1:]))


def test_atlas_exports(tmp_path):
    atlas = tst_sum([(0, 0), (1, 0), (0.5, 0.4)], 3)
    df = atlas.to_dataframe()
    assert list(df.columns) == ['level', 'i', 'k', 'beta', 'diam']
    assert len(df) == len(atlas.entries)
    assert set(atlas.to_dict()) == {'diam', 'sum', 'j_max'}
    atlas.write_csv(str(tmp_path / 'atlas.csv'))
    assert (tmp_path / 'atlas.csv').exists()


def test_tst_sum_capacity():
    rng = np.random.default_rng(5)
    with pytest.raises(CapacityError):
        tst_sum(rng.uniform(0, 1, size=(2000, 2)), 10, max_squares=500)


def test_dyadic_squares_meeting():
    squares = dyadic_squares_meeting([(0.3, 0.3)], 2)
    assert len(squares) == 9
    assert DyadicSquare(2, 1, 1) in squares
    for Q in squares:
        assert Q.expanded(3).contains([(0.3, 0.3)]).all()


def test_curve_length_floor_of_a_circle_increases_with_resolution():
    n = 2000
    z = np.exp(2j * np.pi * np.arange(n) / n)
    pts = np.column_stack([z.real, z.imag])
    floors = [curve_length_floor(pts, r) for r in (5.0, 1.0, 0.3, 0.1, 0.03)]
    # no square is as large as r=5: only the diameter counts
    assert floors[0] == pytest.approx(2.0, rel=1e-6)
    assert all(a < b for a, b in zip(floors[:-1], floors[1:]))
    # up to the universal constant, the sum stays comparable to the length
    assert floors[-1] < 10 * 2 * np.pi


def test_curve_length_floor_with_tiles():
    pts = [(t, 0.0) for t in np.linspace(0, 1, 50)]
    assert curve_length_floor(pts, 0.1, tiles=True) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        curve_length_floor(pts, 0.0)


def test_tiles_with_blow_up_meeting():
    pts = np.array([(0.0, 0.0)])
    tiles = tiles_with_blow_up_meeting(pts, 2, theta=ABS_LAMBDA ** 2)
    assert TileAddress(2, 0, 0) in tiles
    for T in tiles:
        assert abs(T.center) <= 0.5 * ABS_LAMBDA ** 2 * T.diam * 1.01 + 1e-12


def test_wiggliness_score():
    U = [TileAddress(3, a, 0) for a in range(-6, 7)]
    cands = wiggliness_candidates(U, [1, 2])
    assert cands
    # a row of tiles is nearly flat: the sum is small against a long curve
    score = wiggliness_score(100.0, U, cands, n=3)
    assert score < 0
    with pytest.raises(ValueError):
        wiggliness_score(1.0, U, [TileAddress(4, 0, 0)], n=3)
    with pytest.raises(ValueError):
        wiggliness_score(1.0, [], cands)
    assert math.isfinite(wiggliness_score(0.0, U, cands, sample='boundary'))


def test_tripled_square_is_closed():
    # (0.5, 0.5) sits on the top edge of 3 (.) Q for Q = [0.25, 0.5] x [0, 0.25]
    E = [(0, 0), (0.25, 0), (0.5, 0.5), (1, 1)]
    Q = DyadicSquare(2, 1, 0)
    assert Q.expanded(3).contains([(0.5, 0.5)]).all()
    atlas = tst_sum(E, 2)
    assert atlas.entries[(2, 1, 0)] > 0
    assert atlas.entries[(2, 1, 0)] == pytest.approx(beta(E, Q.expanded(3)))


def test_squares_meeting_a_grid_corner():
    squares = dyadic_squares_meeting([(0.5, 0.5)], 1)
    assert len(squares) == 16
    assert DyadicSquare(1, -1, -1) in squares and DyadicSquare(1, 2, 2) in squares
    for Q in squares:
        assert Q.expanded(3).contains([(0.5, 0.5)]).all()
