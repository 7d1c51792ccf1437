import math

import numpy as np
import pytest

from flab.geometry_sets import RasterSet, raster_circle, rasterize_polyline
from flab.gosper_tiling import ABS_LAMBDA, TileAddress, children, touches
from flab.config import DFLT_CONFIG
from flab.experiments import EXPERIMENT_DEFAULTS
from flab.util import InsufficientDepthError, ResolutionError
from flab.whitney_tree import (
    DFLT_H,
    WhitneyTree,
    boundary_distance,
    build_tree,
    chain_component,
    check_surround_lemma,
    distance_ratios,
    growth_dimension,
    level_gap_violations,
    limit_points,
    local_dimension_bound,
    nesting_violations,
    pick_root,
    pruning_ratios,
    rays,
    regular_tree,
    sibling_overlaps,
    sibling_separation,
    truncate,
    wall,
    wall_circle_violations,
    wall_separates,
    whitney_tiles,
)

PRUNING_BOUND = ABS_LAMBDA ** 14


@pytest.fixture(scope='module')
def circle():
    return raster_circle(1.0, 0.01)


@pytest.fixture(scope='module')
def circle_tiles(circle):
    return whitney_tiles(circle, 0, 2)


def test_center_tile_is_a_whitney_tile(circle, circle_tiles):
    assert TileAddress(1, 0, 0) in circle_tiles
    assert TileAddress(0, 0, 0) not in circle_tiles
    assert pick_root(circle, 1, near=0j) == TileAddress(1, 0, 0)


def test_whitney_tiles_levels(circle_tiles):
    assert len(circle_tiles)
    assert {G.level for G in circle_tiles} <= {0, 1, 2}
    assert circle_tiles.to_dict()['level_range'] == [0, 2]


def test_adjacent_whitney_tiles_differ_by_at_most_one_level(circle_tiles):
    assert level_gap_violations(circle_tiles) == []


def test_segment_level_gaps():
    K = rasterize_polyline([[-0.5, 0.0], [0.5, 0.0]], 0.01)
    W = whitney_tiles(K, 0, 2)
    assert len(W)
    assert level_gap_violations(W) == []


def test_distance_ratios_are_bounded(circle_tiles):
    ratios = distance_ratios(circle_tiles)
    assert len(ratios) == len(circle_tiles)
    assert np.all(np.isfinite(ratios))
    assert np.all(ratios > 0)


def test_chain_component_and_wall(circle_tiles):
    G = TileAddress(1, 0, 0)
    comp = chain_component(circle_tiles, G)
    assert G in comp
    assert all(T.level >= G.level for T in comp)
    assert G in wall(circle_tiles, G, 1)
    with pytest.raises(ValueError):
        wall(circle_tiles, G, 0)
    with pytest.raises(ValueError):
        chain_component(circle_tiles, TileAddress(0, 0, 0))


def test_wall_diagnostics(circle_tiles):
    G = TileAddress(1, 0, 0)
    assert wall_separates(circle_tiles, G, G.level)
    level_two = wall(circle_tiles, G, 2)
    assert level_two
    # the separating circle of the center tile lies far outside the unit circle
    violations = wall_circle_violations(circle_tiles, G, 2)
    assert violations
    assert all(comp <= level_two for comp in violations)
    assert check_surround_lemma(circle_tiles, 2) == []
    assert check_surround_lemma(circle_tiles, 1) == []


def test_whitney_tiles_argument_checks(circle):
    with pytest.raises(ResolutionError):
        whitney_tiles(circle, 0, 6)
    with pytest.raises(ValueError):
        whitney_tiles(circle, 2, 1)
    with pytest.raises(ValueError):
        whitney_tiles(RasterSet(0.01, [(0, 0), (50, 50)]), 0, 1)


def test_build_tree_argument_checks(circle, circle_tiles):
    root = TileAddress(1, 0, 0)
    with pytest.raises(ValueError):
        build_tree(circle, root, h=0, W=circle_tiles)
    with pytest.raises(ValueError):
        build_tree(circle, root, h=1, depth=0, W=circle_tiles)
    # the lam^5 blow-up of the center tile holds the whole circle
    with pytest.raises(ResolutionError):
        build_tree(circle, root, h=1, depth=1, W=circle_tiles)


@pytest.mark.slow
def test_tree_of_a_circle():
    K = raster_circle(1.0, 0.0007)
    root = pick_root(K, 4, near=1 + 0j)
    T = build_tree(K, root, h=1, depth=2)
    for k, gen in enumerate(T.generations):
        assert all(G.level == root.level + k for G in gen)
    assert nesting_violations(T) == []
    assert sibling_overlaps(T) == []
    assert all(ratio <= PRUNING_BOUND for ratio in pruning_ratios(T))


def test_regular_tree_growth():
    assert growth_dimension(regular_tree(7, 2)).estimate == pytest.approx(2.0)
    est = growth_dimension(regular_tree(3, 3))
    assert est.estimate == pytest.approx(math.log(3) / math.log(ABS_LAMBDA))
    assert est.branching == (3.0, 3.0, 3.0)
    assert est.stderr == pytest.approx(0.0)
    assert local_dimension_bound(regular_tree(3, 3)) == pytest.approx(est.estimate)
    with pytest.raises(InsufficientDepthError):
        growth_dimension(regular_tree(3, 1))
    with pytest.raises(ValueError):
        regular_tree(8, 2)


def test_regular_tree_structure():
    T = regular_tree(2, 3, h=2)
    assert [len(gen) for gen in T.generations] == [1, 2, 4, 8]
    for G, kids in T.edges.items():
        for D in kids:
            assert D.level == G.level + 2
            assert any(D in children(C) for C in children(G))
    assert pruning_ratios(T) == [1.0] * 7


def test_truncate():
    T = regular_tree(2, 3)
    v = T.generations[1][0]
    cut = truncate(T, v)
    assert [len(gen) for gen in cut.generations] == [1, 2, 2, 4]
    assert cut.edges[v] == []
    assert len(rays(cut)) == 1 + 4
    with pytest.raises(ValueError):
        truncate(T, TileAddress(9, 0, 0))


def test_rays_and_boundary_distance():
    T = regular_tree(2, 3)
    r = rays(T)
    assert len(r) == 8
    assert all(len(ray) == 4 and ray[0] == T.root for ray in r)
    # first and last rays only share the root
    assert boundary_distance(T, r[0], r[-1], theta=2.0) == 1.0
    assert boundary_distance(T, r[0], r[1], theta=2.0) == 0.25
    assert boundary_distance(T, r[0], r[1]) == pytest.approx(ABS_LAMBDA ** -2)


def test_limit_points_and_sibling_separation():
    T = regular_tree(2, 2)
    points = limit_points(T)
    assert set(points) == set(T.generations[-1])
    rows = sibling_separation(T, d0=0.1)
    assert len(rows) == 1 + 2
    assert all(row['distance'] > 0 for row in rows)


def test_tree_json(tmp_path):
    T = regular_tree(2, 2)
    d = T.to_dict()
    assert d['root'] == {'level': 0, 'a': 0, 'b': 0}
    assert [gen['branching'] for gen in d['generations']] == [2.0, 2.0, 0.0]
    T.write_json(str(tmp_path / 'tree.json'))
    assert (tmp_path / 'tree.json').exists()


def test_full_branching_children_touch():
    T = regular_tree(7, 1)
    kids = T.edges[T.root]
    assert any(touches(a, b) for a in kids for b in kids if a != b)
    assert isinstance(T, WhitneyTree)


def test_wall_height_defaults_agree():
    assert DFLT_H == DFLT_CONFIG['h'] == EXPERIMENT_DEFAULTS['whitney-growth']['h'] == 1
