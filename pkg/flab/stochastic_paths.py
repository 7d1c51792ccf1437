"""Seeded planar Brownian motion (optionally killed), Brownian bridge and simple random walk"""

import json
import struct
import warnings
from dataclasses import dataclass, replace
from typing import Callable, Optional, Union

import numpy as np
import pandas as pd

from flab.util import make_rng

DFLT_DIAM = 1.0
DFLT_DT = DFLT_DIAM ** 2 / 10 ** 6
KINDS = ('bm', 'bridge', 'srw')
SRW_DIRECTIONS = np.array([(1, 0), (0, 1), (-1, 0), (0, -1)], dtype=np.int64)

FRAMES_MAGIC = b'FLABPATH\x01'


@dataclass(frozen=True, eq=False)
class PathSample:
    """
    A sampled path: ``points`` is an (N, 2) array (int64 for random walks).
    ``truncated`` flags a killed path whose kill time lies beyond the sampled steps.
    """

    points: np.ndarray
    dt: float
    seed: int
    kind: str = 'bm'
    kill_time: Optional[float] = None
    truncated: bool = False

    def __post_init__(self):
        assert self.kind in KINDS, f'kind should be one of {KINDS}, was {self.kind}'
        assert len(self.points) >= 1, 'a path has at least one point'

    def __len__(self):
        return len(self.points)

    @property
    def n_steps(self) -> int:
        return len(self.points) - 1

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(len(self.points))

    @property
    def complex(self) -> np.ndarray:
        return self.points[:, 0] + 1j * self.points[:, 1]


def dflt_dt(diam: float = DFLT_DIAM) -> float:
    """Time step whose step size matches a raster of ``diam / 1000`` cells"""
    return diam ** 2 / 10 ** 6


def _bm_points(n_steps: int, dt: float, seed: int) -> np.ndarray:
    increments = make_rng(seed, 'increments').normal(0.0, np.sqrt(dt), size=(n_steps, 2))
    points = np.zeros((n_steps + 1, 2))
    np.cumsum(increments, axis=0, out=points[1:])
    return points


def sample_bm(n_steps: int, dt: float = DFLT_DT, seed: int = 0) -> PathSample:
    """
    Planar Brownian motion from the origin, sampled every ``dt``.

    The increments are drawn sequentially from the ``increments`` stream of ``seed``,
    so a shorter path is always a prefix of a longer one:

    >>> long, short = sample_bm(100, 0.01, seed=1), sample_bm(40, 0.01, seed=1)
    >>> bool(np.array_equal(long.points[:41], short.points))
    True
    >>> sample_bm(3, seed=2).points[0].tolist()
    [0.0, 0.0]
    """
    if n_steps < 1:
        raise ValueError(f'n_steps should be at least 1, was {n_steps}')
    if not dt > 0:
        raise ValueError(f'dt should be positive, was {dt}')
    return PathSample(_bm_points(int(n_steps), dt, seed), dt=dt, seed=seed, kind='bm')


def sample_killed(n_steps_max: int, dt: float = DFLT_DT, seed: int = 0) -> PathSample:
    """
    Brownian motion killed at an independent exponential time of mean 1.

    The path keeps the samples at times ``<= kill_time``. If that needs more than
    ``n_steps_max`` steps the path is cut there and flagged ``truncated``.
    """
    if not dt > 0:
        raise ValueError(f'dt should be positive, was {dt}')
    kill_time = float(make_rng(seed, 'kill_time').exponential(1.0))
    n_steps = int(np.floor(kill_time / dt))
    truncated = n_steps > n_steps_max
    if truncated:
        warnings.warn(
            f'kill time {kill_time:.4g} is beyond {n_steps_max} steps of {dt}: path truncated'
        )
        n_steps = int(n_steps_max)
    return PathSample(
        _bm_points(n_steps, dt, seed),
        dt=dt,
        seed=seed,
        kind='bm',
        kill_time=kill_time,
        truncated=truncated,
    )


def sample_bridge(n_steps: int, seed: int = 0) -> PathSample:
    """
    Brownian bridge ``B(t) - t B(1)`` on [0, 1], from the same increments as
    ``sample_bm(n_steps, 1 / n_steps, seed)``.

    >>> bridge = sample_bridge(50, seed=3)
    >>> bridge.points[0].tolist(), bridge.points[-1].tolist()
    ([0.0, 0.0], [0.0, 0.0])
    """
    if n_steps < 2:
        raise ValueError(f'n_steps should be at least 2, was {n_steps}')
    dt = 1 / n_steps
    points = _bm_points(int(n_steps), dt, seed)
    t = np.arange(n_steps + 1)[:, None] * dt
    points = points - t * points[-1]
    points[-1] = 0.0
    return PathSample(points, dt=dt, seed=seed, kind='bridge')


def sample_srw(n_steps: int, seed: int = 0) -> PathSample:
    """
    Simple random walk on Z^2 from the origin.

    >>> walk = sample_srw(11, seed=0)
    >>> int(np.abs(np.diff(walk.points, axis=0)).sum(axis=1).max())
    1
    >>> int(walk.points[-1].sum()) % 2
    1
    """
    if n_steps < 1:
        raise ValueError(f'n_steps should be at least 1, was {n_steps}')
    directions = make_rng(seed, 'walk').integers(0, 4, size=int(n_steps))
    points = np.zeros((n_steps + 1, 2), dtype=np.int64)
    np.cumsum(SRW_DIRECTIONS[directions], axis=0, out=points[1:])
    return PathSample(points, dt=1.0, seed=seed, kind='srw')


# --------------------------------------------------------------------------------------
# Path transformations


def prefix(path: PathSample, m: int) -> PathSample:
    """The first ``m`` steps of ``path``"""
    if not 0 <= m <= path.n_steps:
        raise ValueError(f'm should be in [0, {path.n_steps}], was {m}')
    return replace(path, points=path.points[: m + 1])


def truncate_at_exit(
    path: PathSample, region: Union[Callable[[np.ndarray], np.ndarray], object]
) -> PathSample:
    """
    The path stopped at its first sample outside ``region`` (that sample included).

    ``region`` is a predicate on (N, 2) point arrays, or any object with a
    ``contains`` method (tiles, blow-ups).
    """
    inside = region.contains(path.points) if hasattr(region, 'contains') else region(path.points)
    outside = np.flatnonzero(~np.asarray(inside, dtype=bool))
    if not len(outside):
        return path
    return prefix(path, int(outside[0]))


def reversed_path(path: PathSample) -> PathSample:
    """Time reversal, re-anchored so that the reversed path starts at the origin"""
    points = path.points[::-1] - path.points[-1]
    return replace(path, points=np.ascontiguousarray(points))


def scaled(path: PathSample, s: float) -> PathSample:
    """Brownian scaling: space by ``s`` and time by ``s**2``"""
    if path.kind == 'srw':
        raise ValueError('scaling a lattice walk does not give a lattice walk')
    kill_time = None if path.kill_time is None else path.kill_time * s ** 2
    return replace(path, points=path.points * s, dt=path.dt * s ** 2, kill_time=kill_time)


def translated(path: PathSample, offset) -> PathSample:
    """The path shifted by ``offset`` (a pair of coordinates)"""
    return replace(path, points=path.points + np.asarray(offset, dtype=path.points.dtype))


# --------------------------------------------------------------------------------------
# Export


def to_dataframe(path: PathSample) -> pd.DataFrame:
    """The path as a ``(t, x, y)`` table"""
    return pd.DataFrame({'t': path.times, 'x': path.points[:, 0], 'y': path.points[:, 1]})


def write_csv(path: PathSample, filepath: str) -> str:
    to_dataframe(path).to_csv(filepath, index=False)
    return filepath


def _header(path: PathSample) -> dict:
    return {
        'kind': path.kind,
        'n': len(path.points),
        'dt': path.dt,
        'seed': int(path.seed),
        'kill_time': path.kill_time,
        'truncated': bool(path.truncated),
        'dtype': '<i8' if path.kind == 'srw' else '<f8',
    }


def write_frames(path: PathSample, filepath: str) -> str:
    """
    Binary frame file: ``FLABPATH\\x01``, a little endian uint32 header length, the
    JSON header ``{kind, n, dt, seed, kill_time, truncated, dtype}``, then the
    ``n x 2`` coordinates in ``dtype``.
    """
    header = _header(path)
    header_bytes = json.dumps(header, sort_keys=True).encode('utf-8')
    with open(filepath, 'wb') as fp:
        fp.write(FRAMES_MAGIC)
        fp.write(struct.pack('<I', len(header_bytes)))
        fp.write(header_bytes)
        fp.write(np.ascontiguousarray(path.points, dtype=header['dtype']).tobytes())
    return filepath


def read_frames(filepath: str) -> PathSample:
    with open(filepath, 'rb') as fp:
        data = fp.read()
    if not data.startswith(FRAMES_MAGIC):
        raise ValueError(f'{filepath} is not a flab path frame file')
    offset = len(FRAMES_MAGIC)
    (header_len,) = struct.unpack_from('<I', data, offset)
    offset += 4
    header = json.loads(data[offset: offset + header_len].decode('utf-8'))
    offset += header_len
    points = np.frombuffer(data, dtype=header['dtype'], offset=offset).reshape(header['n'], 2)
    return PathSample(
        points.astype(np.int64 if header['kind'] == 'srw' else float),
        dt=header['dt'],
        seed=header['seed'],
        kind=header['kind'],
        kill_time=header['kill_time'],
        truncated=header['truncated'],
    )
