"""Command line entry point: sub-commands, run manifests and exit codes"""

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import pandas as pd

import flab
from flab.config import _literal, resolve_config
from flab.dimension_stats import (
    BranchingSpec,
    RegularTree,
    box_dimension,
    edge_percolation_extinction,
    extinction_prob,
    geometric_scales,
    percolated_extinction,
    percolation_survival,
    simulate_branching,
    srw_outer_boundary_means,
    surround_prob_mc,
    wilson_interval,
)
from flab.experiments import EXPERIMENT_DEFAULTS, EXPERIMENTS, run_experiment, whitney_tree_of_path
from flab.geometry_sets import frontier, frontier_stats, rasterize_path, write_pbm
from flab.gosper_tiling import (
    CONSTANTS_VERSION,
    DFLT_CONSTANTS_FILEPATH,
    boundary_polygon,
    compute_constants,
    current_max_generation,
    load_constants,
    set_max_generation,
    tiles_in_window,
    write_constants,
)
from flab.render import (
    plot_frontier,
    plot_generations,
    plot_path,
    plot_tree,
    plot_whitney,
    render_tiling,
    save_svg,
)
from flab.stochastic_paths import (
    dflt_dt,
    sample_bm,
    sample_bridge,
    sample_killed,
    sample_srw,
    write_csv,
    write_frames,
)
from flab.tst_beta import curve_length_floor, set_diameter, tst_sum
from flab.util import DFLT_OUT_DIRPATH, FlabError, resolve_seed, write_json
from flab.whitney_tree import DFLT_H, growth_dimension

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2
PATH_KINDS = ('bm', 'killed', 'bridge', 'srw')
STATS = ('extinction', 'percolation', 'surround', 'srw', 'gosper-dimension')
MANIFEST_FILENAME = 'manifest.json'


class UsageError(ValueError):
    """Bad command, experiment name or parameter value"""


@dataclass
class RunManifest:
    """What a run did: enough to re-run it (``flab rerun``) with identical outputs"""

    command: str
    params: dict
    seed: int
    versions: dict = field(default_factory=dict)
    outputs: List[str] = field(default_factory=list)
    wall_time: float = 0.0

    def to_dict(self) -> dict:
        return {
            'command': self.command,
            'params': self.params,
            'seed': self.seed,
            'versions': self.versions,
            'outputs': self.outputs,
            'wall_time': self.wall_time,
        }

    def write(self, filepath: str) -> str:
        return write_json(self.to_dict(), filepath)

    @classmethod
    def read(cls, filepath: str) -> 'RunManifest':
        with open(filepath) as fp:
            d = json.load(fp)
        return cls(d['command'], d['params'], int(d['seed']), d.get('versions', {}),
                   d.get('outputs', []), float(d.get('wall_time', 0.0)))


def versions() -> dict:
    return {
        'flab': flab.__version__,
        'constants': CONSTANTS_VERSION,
        'numpy': np.__version__,
        'pandas': pd.__version__,
    }


# --------------------------------------------------------------------------------------
# Commands. Each takes the resolved config and the output directory, writes its
# files there and returns ``(report, outputs)``.


def sample_path(cfg):
    """The path described by the ``kind``, ``steps``, ``dt`` and ``seed`` config keys"""
    kind, steps, seed = cfg['kind'], int(cfg['steps']), cfg['seed']
    dt = dflt_dt() if cfg.get('dt') is None else cfg['dt']
    if kind == 'bm':
        return sample_bm(steps, dt, seed=seed)
    if kind == 'killed':
        return sample_killed(steps, dt, seed=seed)
    if kind == 'bridge':
        return sample_bridge(steps, seed=seed)
    if kind == 'srw':
        return sample_srw(steps, seed=seed)
    raise UsageError(f'kind should be one of {PATH_KINDS}, was {kind!r}')


def _path_eps(cfg, path) -> float:
    """The raster cell: ``eps`` if given, else the typical step of the path"""
    if cfg.get('eps') is not None:
        return float(cfg['eps'])
    if path.kind == 'srw':
        return 1.0
    return float(np.sqrt(path.dt))


def cmd_tiling(cfg, out_dirpath):
    level, g, window = cfg['level'], cfg['generation'], tuple(cfg['window'])
    ax = render_tiling(level, window, g, max_tiles=cfg['max_tiles'])
    svg_filepath = save_svg(ax.figure, os.path.join(out_dirpath, 'tiling.svg'))
    generations_filepath = os.path.join(out_dirpath, 'generations.svg')
    plot_generations(range(0, min(g, 3) + 1), saving_path=generations_filepath)
    if cfg.get('write_constants'):
        constants = compute_constants(cfg.get('constants_generation') or 5)
        write_constants(constants, DFLT_CONSTANTS_FILEPATH)
    else:
        constants = load_constants()
    constants_filepath = write_constants(constants, os.path.join(out_dirpath, 'tiling_constants.json'))
    report = {
        'level': level,
        'generation': g,
        'window': list(window),
        'tiles': len(tiles_in_window(level, window, cfg['max_tiles'])),
        'vertices': len(boundary_polygon(g)),
        'constants': constants.to_dict(),
    }
    return report, [svg_filepath, generations_filepath, constants_filepath]


def cmd_path(cfg, out_dirpath):
    path = sample_path(cfg)
    csv_filepath = write_csv(path, os.path.join(out_dirpath, 'path.csv'))
    frames_filepath = write_frames(path, os.path.join(out_dirpath, 'path.frames'))
    ax = plot_path(path)
    svg_filepath = save_svg(ax.figure, os.path.join(out_dirpath, 'path.svg'))
    report = {
        'kind': path.kind,
        'n_steps': path.n_steps,
        'dt': path.dt,
        'kill_time': path.kill_time,
        'truncated': path.truncated,
    }
    return report, [csv_filepath, frames_filepath, svg_filepath]


def cmd_frontier(cfg, out_dirpath):
    path = sample_path(cfg)
    K = rasterize_path(path, _path_eps(cfg, path), max_cells=cfg['max_cells'])
    res = frontier(K)
    stats = frontier_stats(K, res)
    stats.update(seed=cfg['seed'], kind=path.kind, n_steps=path.n_steps)
    pbm_filepath = write_pbm(K, os.path.join(out_dirpath, 'frontier.pbm'))
    csv_filepath = os.path.join(out_dirpath, 'frontier_stats.csv')
    pd.DataFrame([stats]).to_csv(csv_filepath, index=False)
    ax = plot_frontier(K, res)
    svg_filepath = save_svg(ax.figure, os.path.join(out_dirpath, 'frontier.svg'))
    return stats, [pbm_filepath, pbm_filepath + '.json', csv_filepath, svg_filepath]


def cmd_whitney(cfg, out_dirpath):
    path = sample_path(cfg)
    K, W, T = whitney_tree_of_path(path.points, _path_eps(cfg, path), cfg['level'], cfg['h'],
                                   cfg['depth'], seed=cfg['seed'])
    tiles_filepath = write_json(W.to_dict(), os.path.join(out_dirpath, 'whitney_tiles.json'))
    tree_filepath = T.write_json(os.path.join(out_dirpath, 'whitney_tree.json'))
    ax = plot_whitney(W)
    plot_tree(T, ax=ax)
    svg_filepath = save_svg(ax.figure, os.path.join(out_dirpath, 'whitney.svg'))
    report = {
        'root': T.root.to_dict(),
        'tiles': len(W),
        'generations': [len(gen) for gen in T.generations],
    }
    if len(T.generations) >= 3:
        report['growth_dimension'] = growth_dimension(T).to_dict()
    return report, [tiles_filepath, tree_filepath, svg_filepath]


def cmd_beta(cfg, out_dirpath):
    path = sample_path(cfg)
    pts = np.asarray(path.points, dtype=float)
    if cfg.get('tiles'):
        floor = curve_length_floor(pts, cfg['r'], tiles=True, max_squares=cfg['max_squares'])
        return {'diam': set_diameter(pts), 'sum': floor, 'r': cfg['r']}, []
    atlas = tst_sum(pts, cfg['j_max'], max_squares=cfg['max_squares'])
    csv_filepath = atlas.write_csv(os.path.join(out_dirpath, 'beta_atlas.csv'))
    return atlas.to_dict(), [csv_filepath]


def _stats_extinction(cfg):
    spec = BranchingSpec(cfg['offspring_min'], cfg['offspring_max'], cfg['offspring_mean'])
    Z = simulate_branching(spec, cfg['trials'], cfg['depth'], seed=cfg['seed'])
    k = int((Z == 0).sum())
    report = {
        'estimate': extinction_prob(spec),
        'simulated': k / cfg['trials'],
        'ci': list(wilson_interval(k, cfg['trials'])),
        'n_trials': cfg['trials'],
    }
    return report, pd.DataFrame({'run': np.arange(len(Z)), 'population': Z})


def _stats_percolation(cfg):
    T = RegularTree(cfg['arity'], cfg['depth'])
    survived = percolation_survival(T, cfg['p'], cfg['trials'], seed=cfg['seed'], mode=cfg['mode'],
                                    jobs=cfg['jobs'])
    k = int(round(survived * cfg['trials']))
    oracle = percolated_extinction if cfg['mode'] == 'vertex' else edge_percolation_extinction
    report = {
        'estimate': survived,
        'ci': list(wilson_interval(k, cfg['trials'])),
        'n_trials': cfg['trials'],
        'oracle': 1 - oracle(cfg['arity'], cfg['p']),
    }
    return report, None


def _stats_surround(cfg):
    est = surround_prob_mc(cfg['eta'], cfg['r'], cfg['trials'], seed=cfg['seed'],
                           regime=cfg['regime'], jobs=cfg['jobs'])
    return est.to_dict(), est.to_dataframe()


def _stats_srw(cfg):
    df = srw_outer_boundary_means(cfg['ns'], cfg['walks'], seed=cfg['seed'], jobs=cfg['jobs'])
    return {'n_trials': int(cfg['walks']) * len(df), 'means': df['mean'].tolist()}, df


def _stats_gosper_dimension(cfg):
    g = cfg['generation']
    xy = boundary_polygon(g).xy
    est = box_dimension(xy, geometric_scales(cfg['eps_max'], cfg['eps_min'], cfg['n_scales']))
    return est.to_dict(), None


STATS_DEFAULTS = {
    'extinction': {'offspring_min': 0, 'offspring_max': 2, 'offspring_mean': 1.5, 'trials': 10 ** 5, 'depth': 30},
    'percolation': {'arity': 2, 'p': 0.6, 'depth': 12, 'trials': 1000, 'mode': 'vertex'},
    'surround': {'eta': 0.05, 'r': 0.25, 'trials': 1000, 'regime': 'core'},
    'srw': {'ns': (2 ** 10, 2 ** 11, 2 ** 12, 2 ** 13), 'walks': 50},
    'gosper-dimension': {'generation': 8, 'eps_max': 0.1, 'eps_min': 0.002, 'n_scales': 8},
}

_STATS_FUNCS = {
    'extinction': _stats_extinction,
    'percolation': _stats_percolation,
    'surround': _stats_surround,
    'srw': _stats_srw,
    'gosper-dimension': _stats_gosper_dimension,
}


def cmd_stats(cfg, out_dirpath):
    name = cfg['name']
    if name not in _STATS_FUNCS:
        raise UsageError(f'Unknown statistic {name!r}, should be one of {STATS}')
    report, df = _STATS_FUNCS[name](cfg)
    report = dict(report, seed=cfg['seed'], params={k: cfg[k] for k in STATS_DEFAULTS[name]})
    outputs = [write_json(report, os.path.join(out_dirpath, f'stats-{name}.json'))]
    if df is not None:
        csv_filepath = os.path.join(out_dirpath, f'stats-{name}.csv')
        df.to_csv(csv_filepath, index=False)
        outputs.append(csv_filepath)
    return report, outputs


def cmd_experiment(cfg, out_dirpath):
    name = cfg['name']
    if name not in EXPERIMENTS:
        raise UsageError(f'Unknown experiment {name!r}, should be one of {sorted(EXPERIMENTS)}')
    return run_experiment(name, cfg, out_dirpath)


COMMANDS = {
    'tiling': cmd_tiling,
    'path': cmd_path,
    'frontier': cmd_frontier,
    'whitney': cmd_whitney,
    'beta': cmd_beta,
    'stats': cmd_stats,
    'experiment': cmd_experiment,
}


WHITNEY_DEFAULTS = {'level': 4, 'h': DFLT_H, 'depth': 2, 'eps': 0.0004}


def command_defaults(command: str, name: Optional[str] = None) -> dict:
    if command == 'whitney':
        return WHITNEY_DEFAULTS
    if command == 'experiment':
        return EXPERIMENT_DEFAULTS.get(name, {})
    if command == 'stats':
        return STATS_DEFAULTS.get(name, {})
    return {}


def config_section(command: str, name: Optional[str] = None) -> str:
    return f'{command}:{name}' if name else command


def run_command(command: str, cfg: dict, out_dirpath: str) -> RunManifest:
    """Run ``command`` with the resolved ``cfg``, writing outputs and the manifest in ``out_dirpath``"""
    if command not in COMMANDS:
        raise UsageError(f'Unknown command {command!r}, should be one of {sorted(COMMANDS)}')
    os.makedirs(out_dirpath, exist_ok=True)
    previous = set_max_generation(cfg.get('max_generation', current_max_generation()))
    tic = time.perf_counter()
    try:
        report, outputs = COMMANDS[command](cfg, out_dirpath)
    finally:
        set_max_generation(previous)
    wall_time = time.perf_counter() - tic
    logger.info('%s done in %.2fs', command, wall_time)
    print(json.dumps(report, indent=2, sort_keys=True, default=str))
    manifest = RunManifest(command, dict(cfg), cfg['seed'], versions(), list(outputs), wall_time)
    manifest.write(os.path.join(out_dirpath, MANIFEST_FILENAME))
    return manifest


def rerun(manifest_filepath: str, out_dirpath: Optional[str] = None) -> RunManifest:
    """Re-run the command recorded in a manifest, with the same parameters and seed"""
    manifest = RunManifest.read(manifest_filepath)
    if manifest.versions.get('constants', CONSTANTS_VERSION) != CONSTANTS_VERSION:
        logger.warning('manifest was written with constants version %s', manifest.versions['constants'])
    params = dict(manifest.params, seed=manifest.seed)
    if 'window' in params:
        params['window'] = tuple(params['window'])
    out_dirpath = out_dirpath or os.path.dirname(os.path.abspath(manifest_filepath))
    return run_command(manifest.command, params, out_dirpath)


# --------------------------------------------------------------------------------------
# Argument parsing


def _key_value(s: str):
    key, sep, value = s.partition('=')
    if not sep:
        raise argparse.ArgumentTypeError(f'expected KEY=VALUE, got {s!r}')
    return key.strip().replace('-', '_'), _literal(value)


def _add_path_args(parser):
    parser.add_argument('--kind', choices=PATH_KINDS, default=None)
    parser.add_argument('--steps', type=int, default=None)
    parser.add_argument('--dt', type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='flab', description='Gosper tilings, Whitney trees, beta numbers and frontier experiments'
    )
    parser.add_argument('--config', default=None, help='INI config file ([flab] and per-command sections)')
    parser.add_argument('--seed', type=int, default=None, help='master seed (default: $FRONTIERLAB_SEED or 0)')
    parser.add_argument('--jobs', type=int, default=None, help='worker processes for Monte Carlo trials')
    parser.add_argument('--out', default=None, help=f'output directory (default: {DFLT_OUT_DIRPATH})')
    parser.add_argument('-v', '--verbose', action='count', default=0)
    parser.add_argument('--set', dest='overrides', type=_key_value, action='append', default=[],
                        metavar='KEY=VALUE', help='override any config key')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('tiling', help='render a level of the tiling and write the tiling constants')
    p.add_argument('--level', type=int, default=None)
    p.add_argument('--generation', type=int, default=None)
    p.add_argument('--window', type=float, nargs=4, default=None, metavar=('XMIN', 'XMAX', 'YMIN', 'YMAX'))
    p.add_argument('--write-constants', action='store_true', default=None,
                   help='recompute the golden constants file shipped with the package')

    p = sub.add_parser('path', help='sample a path and export it (CSV, frames, SVG)')
    _add_path_args(p)

    p = sub.add_parser('frontier', help='frontier of a sampled path (PBM, stats CSV, SVG)')
    _add_path_args(p)
    p.add_argument('--eps', type=float, default=None)

    p = sub.add_parser('whitney', help='Whitney tiles and tree of a sampled path')
    _add_path_args(p)
    p.add_argument('--eps', type=float, default=None)
    p.add_argument('--level', type=int, default=None)
    p.add_argument('--h', type=int, default=None)
    p.add_argument('--depth', type=int, default=None)

    p = sub.add_parser('beta', help='traveling salesman sum of a sampled path')
    _add_path_args(p)
    p.add_argument('--j-max', type=int, default=None)
    p.add_argument('--tiles', action='store_true', default=None, help='use tile blow-ups instead of dyadic squares')
    p.add_argument('--r', type=float, default=None, help='smallest tile diameter (with --tiles)')

    p = sub.add_parser('stats', help='estimators: ' + ', '.join(STATS))
    p.add_argument('name', choices=STATS)
    p.add_argument('--trials', type=int, default=None)
    p.add_argument('--eta', type=float, default=None)
    p.add_argument('--r', type=float, default=None)
    p.add_argument('--regime', default=None)

    p = sub.add_parser('experiment', help='named experiments: ' + ', '.join(EXPERIMENTS))
    p.add_argument('name')

    p = sub.add_parser('rerun', help='re-run a command from its manifest')
    p.add_argument('manifest')
    return parser


def _flags(args) -> dict:
    skip = {'config', 'out', 'verbose', 'overrides', 'command', 'manifest'}
    flags = {k: v for k, v in vars(args).items() if k not in skip}
    flags.update(dict(args.overrides))
    if flags.get('window') is not None:
        flags['window'] = tuple(flags['window'])
    return flags


def _configure_logging(verbose: int, log_level: str):
    level = {0: log_level, 1: 'INFO'}.get(verbose, 'DEBUG')
    logging.basicConfig(level=level, format='%(asctime)s %(name)s %(levelname)s %(message)s')


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE
    try:
        if args.command == 'rerun':
            _configure_logging(args.verbose, 'WARNING')
            rerun(args.manifest, args.out)
            return EXIT_OK
        name = getattr(args, 'name', None)
        if args.command == 'experiment' and name not in EXPERIMENTS:
            raise UsageError(f'Unknown experiment {name!r}, should be one of {sorted(EXPERIMENTS)}')
        cfg = resolve_config(
            _flags(args),
            args.config,
            section=config_section(args.command, name),
            defaults=command_defaults(args.command, name),
        )
        cfg['seed'] = resolve_seed(cfg['seed'])
        _configure_logging(args.verbose, cfg['log_level'])
        run_command(args.command, cfg, args.out or DFLT_OUT_DIRPATH)
    except FlabError as e:
        logger.error('%s', e)
        print(f'error: {e}', file=sys.stderr)
        return EXIT_FAILURE
    except (ValueError, KeyError, OSError) as e:
        print(f'usage error: {e}', file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
