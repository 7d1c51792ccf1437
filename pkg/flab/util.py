"""Utils: errors, seeding, trial fan-out and small serialization helpers"""

import hashlib
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, Optional

import numpy as np

logger = logging.getLogger(__name__)

DFLT_OUT_DIRPATH = os.path.join(os.getcwd(), 'flab_out')


class FlabError(ValueError):
    """Base class of the numeric / resolution failures raised by flab"""


class CapacityError(FlabError):
    """A grid, polygon or enumeration would exceed the configured size"""


class ResolutionError(FlabError):
    """The raster cell is too coarse for the requested geometric test"""


class DegenerateFitError(FlabError):
    """A regression has nothing to fit (e.g. all counts equal)"""


class InsufficientDepthError(FlabError):
    """A tree does not have enough complete generations"""


class ConstantsError(FlabError):
    """Tiling constants could not be certified at the requested generation"""


# Named sub-streams of the master seed. Values are part of the reproducibility
# contract: changing them changes every sampled path.
STREAMS = {
    'increments': 0,
    'kill_time': 1,
    'start': 2,
    'offset': 3,
    'percolation': 4,
    'branching': 5,
    'walk': 6,
}


def trial_seed(seed: int, trial: int) -> int:
    """
    Derive the seed of trial number ``trial`` from the master ``seed``.

    The derivation is the first 8 bytes (little endian) of
    ``blake2b(f'{seed}:{trial}', digest_size=8)``, so it does not depend on the
    number of workers or on the order trials are run in.

    >>> trial_seed(7, 0) == trial_seed(7, 0)
    True
    >>> trial_seed(7, 0) != trial_seed(7, 1)
    True
    """
    digest = hashlib.blake2b(f'{int(seed)}:{int(trial)}'.encode(), digest_size=8)
    return int.from_bytes(digest.digest(), 'little')


def make_rng(
    seed: int, stream: str = 'increments', trial: Optional[int] = None
) -> np.random.Generator:
    """
    A counter-based (Philox) generator for one named sub-stream of ``seed``,
    optionally for one trial: ``SeedSequence(seed, spawn_key=(stream, trial))``.

    Different streams of the same seed are statistically independent:

    >>> a = make_rng(3, 'increments').random()
    >>> b = make_rng(3, 'kill_time').random()
    >>> a != b
    True
    >>> make_rng(3).random() == a
    True
    >>> make_rng(3, trial=0).random() != make_rng(3, trial=1).random()
    True
    """
    if stream not in STREAMS:
        raise ValueError(f'Unknown stream {stream!r}, should be one of {sorted(STREAMS)}')
    spawn_key = (STREAMS[stream],) if trial is None else (STREAMS[stream], int(trial))
    seq = np.random.SeedSequence(int(seed), spawn_key=spawn_key)
    return np.random.Generator(np.random.Philox(seq))


def resolve_seed(seed: Optional[int] = None) -> int:
    """The given seed, or ``FRONTIERLAB_SEED`` from the environment, or 0"""
    if seed is not None:
        return int(seed)
    return int(os.environ.get('FRONTIERLAB_SEED', 0))


def chunked_trials(n_trials: int, chk_size: int) -> Iterable[range]:
    """
    Split ``range(n_trials)`` into consecutive chunks of (at most) ``chk_size``

    >>> [list(r) for r in chunked_trials(5, 2)]
    [[0, 1], [2, 3], [4]]
    >>> list(chunked_trials(0, 3))
    []
    """
    if chk_size < 1:
        raise ValueError('chk_size should be a positive integer')
    for bt in range(0, n_trials, chk_size):
        yield range(bt, min(bt + chk_size, n_trials))


def _run_chunk(func, trials):
    return [func(trial) for trial in trials]


def map_trials(
    func: Callable[[int], object],
    n_trials: int,
    jobs: int = 1,
    chk_size: Optional[int] = None,
) -> list:
    """
    Apply ``func`` to every trial index and return the results in trial order.

    With ``jobs > 1`` the chunks are dispatched to a process pool; ``func`` must
    then be picklable (a module level function or a ``functools.partial`` of
    one). Results never depend on ``jobs``.

    >>> map_trials(abs, 3)
    [0, 1, 2]
    """
    if jobs is None or jobs <= 1 or n_trials <= 1:
        return [func(trial) for trial in range(n_trials)]
    if chk_size is None:
        chk_size = max(1, n_trials // (4 * jobs))
    chunks = list(chunked_trials(n_trials, chk_size))
    logger.debug('dispatching %d trials in %d chunks to %d workers', n_trials, len(chunks), jobs)
    results = []
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        for chunk_result in pool.map(_run_chunk, [func] * len(chunks), chunks):
            results.extend(chunk_result)
    return results


def _to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _to_jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def dumps_json(obj) -> str:
    """
    Deterministic JSON text (sorted keys, numpy scalars and arrays converted)

    >>> dumps_json({'b': np.int64(2), 'a': np.array([1.5])})
    '{\\n  "a": [\\n    1.5\\n  ],\\n  "b": 2\\n}'
    """
    return json.dumps(_to_jsonable(obj), indent=2, sort_keys=True)


def write_json(obj, filepath: str) -> str:
    """Write ``obj`` as deterministic JSON to ``filepath`` and return the path"""
    dirpath = os.path.dirname(os.path.abspath(filepath))
    os.makedirs(dirpath, exist_ok=True)
    with open(filepath, 'w') as fp:
        fp.write(dumps_json(obj))
        fp.write('\n')
    return filepath
