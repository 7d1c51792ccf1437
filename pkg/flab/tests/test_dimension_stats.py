import math

import numpy as np
import pytest
import sympy as sp
from numpy.testing import assert_allclose

from flab.dimension_stats import (
    DFLT_PERCOLATION_MODE,
    BranchingSpec,
    RegularTree,
    box_counts,
    box_dimension,
    edge_percolation_extinction,
    exponent_fit,
    extinction_by_generation,
    extinction_prob,
    extinction_prob_exact,
    frontier_box_dimension,
    geometric_scales,
    jackknife,
    lyons_threshold,
    percolate_tree,
    percolated_extinction,
    percolation_survival,
    simulate_branching,
    srw_outer_boundary_means,
    surround_prob_mc,
    wilson_interval,
)
from flab.gosper_tiling import annulus_curve
from flab.stochastic_paths import sample_bm
from flab.util import DegenerateFitError, InsufficientDepthError
from flab.whitney_tree import regular_tree


def test_extinction_prob():
    spec = BranchingSpec(0, 2, 1.5)
    assert abs(extinction_prob(spec) - 1 / 3) < 1e-10
    assert extinction_prob_exact(spec) == sp.Rational(1, 3)
    assert extinction_prob(BranchingSpec(0, 2, 1.0)) == 1.0
    assert extinction_prob(BranchingSpec(0, 3, 0.5)) == 1.0


def test_extinction_prob_is_a_fixed_point():
    for m, M, b in [(0, 3, 2.0), (0, 7, 1.2), (0, 2, 1.9)]:
        spec = BranchingSpec(m, M, b)
        q = extinction_prob(spec)
        assert abs(spec.psi(q) - q) < 1e-9
        assert_allclose(q, float(extinction_prob_exact(spec)), atol=1e-10)


def test_extinction_by_generation_increases_to_the_limit():
    spec = BranchingSpec(0, 2, 1.5)
    qs = [extinction_by_generation(spec, n) for n in range(40)]
    assert all(a <= b for a, b in zip(qs[:-1], qs[1:]))
    assert_allclose(qs[-1], 1 / 3, atol=1e-9)


def test_invalid_branching_specs():
    with pytest.raises(ValueError):
        BranchingSpec(2, 2, 2.0)
    with pytest.raises(ValueError):
        BranchingSpec(0, 2, 3.0)
    with pytest.raises(ValueError):
        BranchingSpec(0, 2, 1.0, p=1.0)
    with pytest.raises(ValueError):
        BranchingSpec(0, 2, 1.0, theta=1.0)


def test_simulated_extinction_matches_the_fixed_point():
    Z = simulate_branching(BranchingSpec(0, 2, 1.5), 10 ** 5, 30, seed=0)
    assert abs(np.mean(Z == 0) - 1 / 3) < 0.01


def test_simulation_is_reproducible():
    spec = BranchingSpec(0, 3, 1.2)
    assert np.array_equal(simulate_branching(spec, 100, 10, seed=4), simulate_branching(spec, 100, 10, seed=4))


@pytest.mark.parametrize('p', [0.4, 0.5, 0.6])
def test_vertex_percolation_matches_the_two_point_law(p):
    depth, n_seeds = 12, 1000
    survival = percolation_survival(RegularTree(2, depth), p, n_seeds, seed=1, mode='vertex')
    expected = 1 - extinction_by_generation(BranchingSpec(0, 2, 2 * p, p=p), depth)
    sigma = math.sqrt(expected * (1 - expected) / n_seeds)
    assert abs(survival - expected) <= 4 * sigma + 1e-12


@pytest.mark.parametrize('p', [0.4, 0.5, 0.6])
def test_edge_percolation_matches_the_binomial_law(p):
    depth, n_seeds = 12, 1000
    survival = percolation_survival(RegularTree(2, depth), p, n_seeds, seed=2, mode='edge')
    expected = 1 - edge_percolation_extinction(2, p, depth)
    sigma = math.sqrt(expected * (1 - expected) / n_seeds)
    assert abs(survival - expected) <= 4 * sigma + 1e-12


def test_percolation_limits():
    assert_allclose(percolated_extinction(2, 0.6), 2 / 3, atol=1e-9)
    assert_allclose(edge_percolation_extinction(2, 0.6), 4 / 9, atol=1e-9)
    assert edge_percolation_extinction(2, 0.5) == 1.0
    assert lyons_threshold(1 / 7, math.sqrt(7)) == pytest.approx(2.0)


def test_percolation_on_a_tree_with_edges():
    T = regular_tree(3, 4)
    res = percolate_tree(T, 0.9, seed=0, mode='edge', trial=0)
    assert 1 <= res.size <= 1 + 3 + 9 + 27 + 81
    assert res.depth_reached <= 4
    assert percolate_tree(T, 0.9, seed=0, mode='edge', trial=0) == res
    with pytest.raises(ValueError):
        percolate_tree(T, 0.9, mode='site')


def test_percolation_does_not_depend_on_jobs():
    T = RegularTree(2, 8)
    assert percolation_survival(T, 0.6, 40, seed=3, jobs=1) == percolation_survival(T, 0.6, 40, seed=3, jobs=2)


def test_vertex_percolation_is_the_default():
    T = RegularTree(2, 10)
    assert DFLT_PERCOLATION_MODE == 'vertex'
    for trial in range(20):
        assert percolate_tree(T, 0.6, seed=4, trial=trial) == percolate_tree(T, 0.6, seed=4, mode='vertex', trial=trial)


def test_subcritical_percolation_dies_out():
    # mean offspring 0.8, so P(Z_20 > 0) <= 0.8**20
    assert percolation_survival(RegularTree(2, 20), 0.4, 10 ** 4, seed=5, mode='vertex') < 0.02


def test_wilson_interval():
    lo, hi = wilson_interval(50, 100)
    assert lo < 0.5 < hi
    assert_allclose(0.5 - lo, hi - 0.5)
    assert wilson_interval(100, 100)[1] == 1.0
    with pytest.raises(ValueError):
        wilson_interval(0, 0)


def test_jackknife():
    est, se = jackknife([2.0, 2.0, 2.0])
    assert (est, se) == (2.0, 0.0)
    with pytest.raises(InsufficientDepthError):
        jackknife([1.0])


def test_box_dimension_of_a_segment():
    t = np.arange(0, 1, 1e-4)
    est = box_dimension(np.column_stack([t, 0.3 + 0 * t]), geometric_scales(0.1, 0.001, 6))
    assert abs(est.slope - 1) < 0.02
    assert est.ci[0] <= est.slope <= est.ci[1]
    assert set(est.to_dict()) >= {'estimate', 'r2', 'ci', 'scales', 'counts'}


def test_box_dimension_argument_checks():
    pts = np.random.default_rng(0).uniform(size=(100, 2))
    with pytest.raises(ValueError):
        box_dimension(pts, [0.1, 0.01, 0.001])
    with pytest.raises(ValueError):
        box_dimension(pts, [0.001, 0.01, 0.1, 1.0])
    with pytest.raises(ValueError):
        box_dimension(pts, [0.1, 0.08, 0.06, 0.04])
    with pytest.raises(DegenerateFitError):
        box_dimension([(0.5, 0.5)], geometric_scales(0.1, 0.001, 5))


def test_box_counts():
    assert box_counts([(0.05, 0.05), (0.15, 0.05)], [1.0, 0.1]) == [1, 2]


def test_exponent_fit_needs_decades():
    with pytest.raises(ValueError):
        exponent_fit([(n, n ** 0.5) for n in (10, 20, 30, 40)])
    fit = exponent_fit([(n, 3 * n ** 0.75) for n in (2 ** 10, 2 ** 12, 2 ** 14, 2 ** 16)])
    assert_allclose(fit.slope, 0.75)


def test_frontier_box_dimension_of_a_brownian_path():
    path = sample_bm(20_000, 1e-4, seed=0)
    est, stats = frontier_box_dimension(path, geometric_scales(0.1, 0.003, 6))
    assert stats['frontier_cells'] <= stats['cells']
    assert 1.0 < est.slope < 1.7


def _annulus_sampler(eta):
    def sampler(seed, G):
        verts, _ = annulus_curve(G, eta)
        verts = np.append(verts, verts[:1])
        return np.column_stack([verts.real, verts.imag])

    return sampler


def _segment_sampler(seed, G):
    c, r = G.center, G.diam
    return np.array([[c.real - r, c.imag], [c.real + r, c.imag]])


def _far_sampler(seed, G):
    return np.array([[10.0, 10.0], [10.5, 10.0]])


def test_surround_prob_with_synthetic_sets():
    eta, r = 0.05, 0.25
    est = surround_prob_mc(eta, r, 4, seed=0, sampler=_annulus_sampler(eta))
    assert est.estimate == 1.0
    assert est.to_dataframe()['surrounds'].all()
    assert surround_prob_mc(eta, r, 4, seed=0, sampler=_segment_sampler).estimate == 0.0
    far = surround_prob_mc(eta, r, 4, seed=0, sampler=_far_sampler, regime='origin')
    assert far.estimate == 1.0
    assert not far.to_dataframe()['hits_core'].any()
    assert far.ci[0] < 1.0 == far.ci[1]


def test_surround_prob_argument_checks():
    with pytest.raises(ValueError):
        surround_prob_mc(0.2, 0.25, 1)
    with pytest.raises(ValueError):
        surround_prob_mc(0.05, 1.5, 1)
    with pytest.raises(ValueError):
        surround_prob_mc(0.05, 0.25, 1, regime='anywhere')


def test_srw_outer_boundary_means():
    df = srw_outer_boundary_means([16, 64, 256], walks=5, seed=0)
    assert list(df.columns) == ['n', 'mean', 'std', 'walks']
    assert list(df['n']) == [16, 64, 256]
    assert (df['mean'] > 0).all()
    assert df.equals(srw_outer_boundary_means([16, 64, 256], walks=5, seed=0, jobs=2))


@pytest.mark.slow
@pytest.mark.parametrize('regime', ['core', 'origin'])
def test_surround_prob_of_killed_brownian_paths(regime):
    est = surround_prob_mc(0.05, 0.25, 1000, seed=0, regime=regime, jobs=8)
    assert est.n_trials == 1000
    assert est.ci[0] > 0


@pytest.mark.slow
def test_srw_outer_boundary_exponent():
    df = srw_outer_boundary_means([2 ** k for k in range(10, 17)], walks=200, seed=0, jobs=8)
    fit = exponent_fit(list(zip(df['n'], df['mean'])))
    assert 0.55 <= fit.slope <= 0.75
    assert fit.slope - 0.5 > 3 * fit.stderr
