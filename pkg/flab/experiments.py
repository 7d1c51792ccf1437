"""Named experiments: each one composes the library operations and writes a report"""

import logging
import math
import os
from functools import partial

import numpy as np
import pandas as pd

from flab.dimension_stats import (
    exponent_fit,
    frontier_box_dimension,
    geometric_scales,
    jackknife,
    srw_outer_boundary_means,
    surround_prob_mc,
)
from flab.geometry_sets import rasterize_path
from flab.gosper_tiling import ABS_LAMBDA, blow_up
from flab.stochastic_paths import sample_bm, sample_bridge
from flab.tst_beta import curve_length_floor, tst_sum
from flab.util import InsufficientDepthError, ResolutionError, map_trials, trial_seed, write_json
from flab.whitney_tree import (
    CHAIN_BLOW_UP,
    build_tree,
    growth_dimension,
    level_gap_violations,
    pick_root,
    pruning_ratios,
    sibling_overlaps,
    whitney_tiles,
)

logger = logging.getLogger(__name__)

PRUNING_BOUND = ABS_LAMBDA ** 14

# Defaults of each experiment (overlaid on DFLT_CONFIG). The defaults of
# frontier-dim and srw-exponent are the full-size acceptance runs.
EXPERIMENT_DEFAULTS = {
    'frontier-dim': {
        'seeds': 20,
        'steps': 10 ** 6,
        'eps_max': 0.1,
        'eps_min': 0.003,
        'n_scales': 8,
    },
    'bridge-frontier': {
        'seeds': 20,
        'steps': 10 ** 6,
        'eps_max': 0.1,
        'eps_min': 0.003,
        'n_scales': 8,
    },
    'srw-exponent': {
        'ns': tuple(2 ** k for k in range(10, 17)),
        'walks': 200,
    },
    'surround-c0': {
        'eta': 0.05,
        'r': 0.25,
        'trials': 1000,
        'regimes': ('core', 'origin'),
    },
    'whitney-growth': {
        'seeds': 5,
        'steps': 10 ** 5,
        'eps': 0.0004,
        'level': 4,
        'h': 1,
        'depth': 2,
    },
    'tst-circle': {
        'radius': 1.0,
        'n_points': 2000,
        'j_max': 8,
        'r_list': (0.5, 0.1, 0.02),
    },
}


def _mean_se(values):
    values = np.asarray(values, dtype=float)
    se = float(values.std(ddof=1) / math.sqrt(len(values))) if len(values) > 1 else float('nan')
    return float(values.mean()), se


# --------------------------------------------------------------------------------------
# Frontier dimension of Brownian paths and bridges


def _frontier_dim_trial(trial, seed, steps, kind, eps_list):
    s = trial_seed(seed, trial)
    path = sample_bridge(steps, seed=s) if kind == 'bridge' else sample_bm(steps, 1 / steps, seed=s)
    est, stats = frontier_box_dimension(path, eps_list)
    return {'trial': trial, 'seed': s, 'estimate': est.slope, 'r2': est.r2, **stats}


def _frontier_dim(cfg, out_dirpath, kind, name):
    eps_list = geometric_scales(cfg['eps_max'], cfg['eps_min'], cfg['n_scales'])
    func = partial(_frontier_dim_trial, seed=cfg['seed'], steps=cfg['steps'], kind=kind,
                   eps_list=eps_list)
    rows = map_trials(func, cfg['seeds'], cfg['jobs'])
    df = pd.DataFrame(rows)
    mean, se = _mean_se(df['estimate'])
    report = {
        'estimate': mean,
        'stderr': se,
        'ci': [mean - 1.96 * se, mean + 1.96 * se],
        'n_trials': len(df),
        'min_r2': float(df['r2'].min()),
        'above_one': bool(mean - 1 > 3 * se),
        'scales': eps_list,
    }
    csv_filepath = os.path.join(out_dirpath, f'{name}.csv')
    df.to_csv(csv_filepath, index=False)
    return report, [csv_filepath]


def frontier_dim(cfg, out_dirpath):
    """Box dimension of the frontier of Brownian paths on [0, 1], over seeds"""
    return _frontier_dim(cfg, out_dirpath, 'bm', 'frontier-dim')


def bridge_frontier(cfg, out_dirpath):
    """Box dimension of the frontier of Brownian bridges (closed curves), over seeds"""
    return _frontier_dim(cfg, out_dirpath, 'bridge', 'bridge-frontier')


# --------------------------------------------------------------------------------------
# Random walk outer boundary


def srw_exponent(cfg, out_dirpath):
    """Growth exponent of the mean outer boundary size of simple random walks"""
    df = srw_outer_boundary_means(cfg['ns'], cfg['walks'], seed=cfg['seed'], jobs=cfg['jobs'])
    fit = exponent_fit(list(zip(df['n'], df['mean'])))
    report = dict(fit.to_dict(), n_trials=int(cfg['walks']) * len(df),
                  above_half=bool(fit.slope - 0.5 > 3 * fit.stderr))
    csv_filepath = os.path.join(out_dirpath, 'srw-exponent.csv')
    df.to_csv(csv_filepath, index=False)
    return report, [csv_filepath]


# --------------------------------------------------------------------------------------
# Surround probability


def surround_c0(cfg, out_dirpath):
    """Probability of the surround-or-miss event, in each start point regime"""
    report, outputs = {'regimes': {}}, []
    for regime in cfg['regimes']:
        est = surround_prob_mc(cfg['eta'], cfg['r'], cfg['trials'], seed=cfg['seed'],
                               regime=regime, jobs=cfg['jobs'])
        report['regimes'][regime] = dict(est.to_dict(), ci_excludes_zero=est.ci[0] > 0)
        csv_filepath = os.path.join(out_dirpath, f'surround-c0-{regime}.csv')
        est.to_dataframe().to_csv(csv_filepath, index=False)
        outputs.append(csv_filepath)
    report['estimate'] = min(r['estimate'] for r in report['regimes'].values())
    return report, outputs


# --------------------------------------------------------------------------------------
# Whitney trees of Brownian paths


MAX_ROOT_BUMPS = 4


def _proper_root(K, level, near):
    """The root closest to ``near`` at ``level``, or finer until its lam^5 blow-up leaves part of K out"""
    for n in range(level, level + MAX_ROOT_BUMPS + 1):
        root = pick_root(K, n, near=near)
        if not np.all(blow_up(root, CHAIN_BLOW_UP).contains(K.cells)):
            if n > level:
                logger.info('root level raised from %d to %d', level, n)
            return root
    raise ResolutionError(f'the lam^5 blow-ups of roots of levels {level}..{n} contain all of K')


def whitney_tree_of_path(points, eps, level, h, depth, seed=None):
    """
    The Whitney decomposition and tree of a path rasterized at ``eps``, rooted near its
    middle at ``level`` (or the first finer level whose root blow-up does not hold all of K)
    """
    K = rasterize_path(points, eps)
    near = complex(*np.asarray(points, dtype=float)[len(points) // 2])
    root = _proper_root(K, level, near)
    W = whitney_tiles(K, root.level, root.level + h * depth, roi=blow_up(root, CHAIN_BLOW_UP))
    T = build_tree(K, root, h, depth, W=W)
    logger.info('seed %s: root %s, generation sizes %s', seed, root,
                [len(gen) for gen in T.generations])
    return K, W, T


def _whitney_trial(trial, seed, steps, eps, level, h, depth):
    s = trial_seed(seed, trial)
    path = sample_bm(steps, 1 / steps, seed=s)
    _, W, T = whitney_tree_of_path(path.points, eps, level, h, depth, seed=s)
    try:
        dim = growth_dimension(T).estimate
    except InsufficientDepthError:
        dim = float('nan')
    ratios = pruning_ratios(T)
    return {
        'trial': trial,
        'seed': s,
        'root': str(T.root),
        'sizes': ' '.join(str(len(gen)) for gen in T.generations),
        'growth_dimension': dim,
        'level_gap_violations': len(level_gap_violations(W)),
        'sibling_overlaps': len(sibling_overlaps(T)),
        'max_pruning_ratio': max(ratios) if ratios else 0.0,
    }


def whitney_growth(cfg, out_dirpath):
    """Whitney tree statistics and growth dimension of Brownian paths, over seeds"""
    func = partial(_whitney_trial, seed=cfg['seed'], steps=cfg['steps'], eps=cfg['eps'],
                   level=cfg['level'], h=cfg['h'], depth=cfg['depth'])
    df = pd.DataFrame(map_trials(func, cfg['seeds'], cfg['jobs']))
    dims = df['growth_dimension'].dropna().tolist()
    if len(dims) >= 2:
        estimate, se = jackknife(dims)
    else:
        estimate, se = (dims[0] if dims else float('nan')), float('nan')
    report = {
        'estimate': estimate,
        'stderr': se,
        'n_trials': len(df),
        'level_gap_violations': int(df['level_gap_violations'].sum()),
        'sibling_overlaps': int(df['sibling_overlaps'].sum()),
        'max_pruning_ratio': float(df['max_pruning_ratio'].max()),
        'pruning_bound': PRUNING_BOUND,
    }
    csv_filepath = os.path.join(out_dirpath, 'whitney-growth.csv')
    df.to_csv(csv_filepath, index=False)
    return report, [csv_filepath]


# --------------------------------------------------------------------------------------
# Traveling salesman sums of a circle


def tst_circle(cfg, out_dirpath):
    """Traveling salesman sum and curve length floors of points on a circle"""
    radius, n = cfg['radius'], cfg['n_points']
    z = radius * np.exp(2j * np.pi * np.arange(n) / n)
    pts = np.column_stack([z.real, z.imag])
    atlas = tst_sum(pts, cfg['j_max'])
    length = 2 * np.pi * radius
    floors = {str(r): curve_length_floor(pts, r) for r in cfg['r_list']}
    report = dict(atlas.to_dict(), estimate=atlas.sum / length, length=length, floors=floors,
                  level_sums=atlas.level_sums)
    csv_filepath = os.path.join(out_dirpath, 'tst-circle.csv')
    atlas.write_csv(csv_filepath)
    return report, [csv_filepath]


EXPERIMENTS = {
    'frontier-dim': frontier_dim,
    'srw-exponent': srw_exponent,
    'surround-c0': surround_c0,
    'whitney-growth': whitney_growth,
    'tst-circle': tst_circle,
    'bridge-frontier': bridge_frontier,
}


def run_experiment(name, cfg, out_dirpath):
    """Run the experiment ``name``, write its report JSON and return ``(report, outputs)``"""
    if name not in EXPERIMENTS:
        raise KeyError(f'Unknown experiment {name!r}, should be one of {sorted(EXPERIMENTS)}')
    os.makedirs(out_dirpath, exist_ok=True)
    report, outputs = EXPERIMENTS[name](cfg, out_dirpath)
    report = dict(report, experiment=name, seed=cfg['seed'])
    report_filepath = write_json(report, os.path.join(out_dirpath, f'{name}.json'))
    return report, outputs + [report_filepath]
