"""Dimension estimators, branching / percolation solvers and Monte Carlo harnesses"""

import logging
import math
import warnings
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import sympy as sp
from scipy import optimize, stats
from sklearn.linear_model import LinearRegression
from sklearn.metrics import r2_score

from flab.geometry_sets import (
    RasterSet,
    eta_surrounds,
    frontier,
    hits_core,
    outer_boundary_lattice,
    rasterize_path,
    rasterize_segments,
)
from flab.gosper_tiling import HomotheticTile, core_contains
from flab.stochastic_paths import sample_killed, sample_srw
from flab.util import (
    DegenerateFitError,
    InsufficientDepthError,
    ResolutionError,
    make_rng,
    map_trials,
    trial_seed,
)

logger = logging.getLogger(__name__)

MIN_SCALES = 4
MIN_DECADES = 1.5
DFLT_R2_WARN = 0.99
DFLT_CONFIDENCE = 0.95
BISECT_XTOL = 1e-12
BISECT_UPPER = 1 - 1e-9
DFLT_POPULATION_CAP = 10 ** 6
DFLT_PERCOLATION_MODE = 'vertex'


# --------------------------------------------------------------------------------------
# Log-log fits


@dataclass(frozen=True)
class DimEstimate:
    """Least squares slope of a log-log fit, with its 95% confidence interval"""

    slope: float
    intercept: float
    r2: float
    scales: Tuple[float, ...]
    counts: Tuple[float, ...]
    ci: Tuple[float, float]
    stderr: float = 0.0

    def to_dict(self) -> dict:
        return {
            'estimate': self.slope,
            'intercept': self.intercept,
            'r2': self.r2,
            'scales': list(self.scales),
            'counts': list(self.counts),
            'ci': list(self.ci),
            'stderr': self.stderr,
        }


def _check_decades(values: np.ndarray, what: str):
    if len(np.unique(values)) < MIN_SCALES:
        raise ValueError(f'need at least {MIN_SCALES} distinct {what}, got {len(np.unique(values))}')
    if np.log10(values.max() / values.min()) < MIN_DECADES - 1e-9:
        raise ValueError(f'{what} should span at least {MIN_DECADES} decades')


def _loglog_fit(x, y, confidence: float = DFLT_CONFIDENCE, r2_warn: float = DFLT_R2_WARN):
    """slope, intercept, r2, (lo, hi), stderr of ``log y = slope log x + intercept``"""
    y = np.asarray(y, dtype=float)
    if np.all(y == y[0]):
        raise DegenerateFitError('all counts are equal: nothing to fit')
    if np.any(y <= 0):
        raise DegenerateFitError('counts should be positive')
    lx, ly = np.log(np.asarray(x, dtype=float)), np.log(y)
    model = LinearRegression().fit(lx[:, None], ly)
    pred = model.predict(lx[:, None])
    slope, intercept = float(model.coef_[0]), float(model.intercept_)
    r2 = float(r2_score(ly, pred))
    n = len(lx)
    sxx = float(((lx - lx.mean()) ** 2).sum())
    stderr = math.sqrt(float(((ly - pred) ** 2).sum()) / (n - 2) / sxx) if n > 2 else 0.0
    half = stats.t.ppf(0.5 + confidence / 2, n - 2) * stderr
    if r2 < r2_warn:
        warnings.warn(f'log-log fit has r2={r2:.4f} < {r2_warn}')
    return slope, intercept, r2, (slope - half, slope + half), stderr


def geometric_scales(eps_max: float, eps_min: float, n: int = 6) -> list:
    """
    ``n`` geometrically spaced scales from ``eps_max`` down to ``eps_min``

    >>> [round(e, 4) for e in geometric_scales(0.1, 0.001, 3)]
    [0.1, 0.01, 0.001]
    """
    return [float(e) for e in np.geomspace(eps_max, eps_min, n)]


def _box_points(K) -> np.ndarray:
    if isinstance(K, RasterSet):
        if K.is_empty:
            raise ValueError('K should be nonempty')
        return K.cells
    pts = np.asarray(K, dtype=float).reshape(-1, 2)
    if not len(pts):
        raise ValueError('K should be nonempty')
    return pts


def box_counts(K, eps_list: Sequence[float]) -> list:
    """Number of occupied boxes ``[i eps, (i+1) eps) x [j eps, (j+1) eps)`` per scale"""
    pts = _box_points(K)
    return [len(np.unique(np.floor(pts / eps).astype(np.int64), axis=0)) for eps in eps_list]


def box_dimension(K, eps_list: Sequence[float]) -> DimEstimate:
    """
    Box counting dimension of a raster (cell centers) or a point set: the slope of
    ``log N(eps)`` against ``log(1/eps)``. Needs at least 4 strictly decreasing
    scales spanning 1.5 decades.
    """
    eps = np.asarray(eps_list, dtype=float)
    if len(eps) < MIN_SCALES:
        raise ValueError(f'need at least {MIN_SCALES} scales, got {len(eps)}')
    if not np.all(np.diff(eps) < 0):
        raise ValueError('scales should be strictly decreasing')
    _check_decades(eps, 'scales')
    if isinstance(K, RasterSet) and eps.min() < K.cell:
        warnings.warn(f'smallest scale {eps.min()} is below the raster cell {K.cell}')
    counts = box_counts(K, eps)
    slope, intercept, r2, ci, stderr = _loglog_fit(1 / eps, counts)
    return DimEstimate(slope, intercept, r2, tuple(eps.tolist()), tuple(float(c) for c in counts), ci,
                       stderr)


def exponent_fit(pairs: Sequence[Tuple[float, float]]) -> DimEstimate:
    """
    Slope of ``log mean_count`` against ``log n`` for ``(n, mean_count)`` pairs

    >>> fit = exponent_fit([(n, n ** 0.5) for n in (10, 100, 1000, 10000)])
    >>> round(fit.slope, 9)
    0.5
    """
    ns = np.array([p[0] for p in pairs], dtype=float)
    means = np.array([p[1] for p in pairs], dtype=float)
    _check_decades(ns, 'values of n')
    slope, intercept, r2, ci, stderr = _loglog_fit(ns, means)
    return DimEstimate(slope, intercept, r2, tuple(ns.tolist()), tuple(means.tolist()), ci, stderr)


def frontier_box_dimension(path, eps_list: Sequence[float], cell: Optional[float] = None,
                           max_cells=None) -> Tuple[DimEstimate, dict]:
    """
    Box dimension of the frontier of a sampled path, rasterized at ``cell`` (the
    smallest scale by default). Returns the estimate and frontier statistics.
    """
    cell = min(eps_list) if cell is None else cell
    kwargs = {} if max_cells is None else {'max_cells': max_cells}
    K = rasterize_path(path, cell, **kwargs)
    res = frontier(K)
    est = box_dimension(res.frontier_cells, eps_list)
    return est, {'cells': len(K), 'frontier_cells': len(res.frontier_cells),
                 'hole_count': res.hole_count}


# --------------------------------------------------------------------------------------
# Branching processes


@dataclass(frozen=True)
class BranchingSpec:
    """
    Two-point offspring law on ``{m, M}`` with mean ``b``, whose generating function
    ``psi(s) = s^m + (b - m) / (M - m) (s^M - s^m)`` dominates the offspring of a
    percolated tree (``p`` retention, ``theta`` metric base).
    """

    m: int
    M: int
    b: float
    p: float = 0.5
    theta: float = 2.0

    def __post_init__(self):
        if self.m < 0 or int(self.m) != self.m:
            raise ValueError(f'm should be a nonnegative integer, was {self.m}')
        if not self.M > self.m or int(self.M) != self.M:
            raise ValueError(f'M should be an integer above m={self.m}, was {self.M}')
        if not self.m <= self.b <= self.M:
            raise ValueError(f'b should be in [{self.m}, {self.M}], was {self.b}')
        if not 0 < self.p < 1:
            raise ValueError(f'p should be in (0, 1), was {self.p}')
        if not self.theta > 1:
            raise ValueError(f'theta should exceed 1, was {self.theta}')

    @property
    def prob_max(self) -> float:
        """Probability of ``M`` offspring"""
        return (self.b - self.m) / (self.M - self.m)

    def psi(self, s):
        """
        >>> BranchingSpec(0, 2, 1.5).psi(1.0)
        1.0
        """
        return s ** self.m + self.prob_max * (s ** self.M - s ** self.m)


def extinction_prob(spec: BranchingSpec) -> float:
    """
    The smallest fixed point of ``psi`` in [0, 1], by bisection on [0, 1 - 1e-9].

    >>> round(extinction_prob(BranchingSpec(0, 2, 1.5)), 10)
    0.3333333333
    >>> extinction_prob(BranchingSpec(1, 3, 2.0))
    0.0
    """
    if spec.m >= 1 or spec.psi(0.0) == 0:
        return 0.0
    if spec.b <= 1:
        return 1.0
    return float(optimize.bisect(lambda s: spec.psi(s) - s, 0.0, BISECT_UPPER, xtol=BISECT_XTOL,
                                 maxiter=200))


def extinction_prob_exact(spec: BranchingSpec):
    """The same fixed point as an exact sympy number (cross-check of the bisection)"""
    s = sp.Symbol('s')
    b = sp.nsimplify(spec.b)
    psi = s ** spec.m + (b - spec.m) / (spec.M - spec.m) * (s ** spec.M - s ** spec.m)
    roots = [r for r in sp.Poly(sp.expand(psi - s), s).real_roots() if 0 <= r <= 1]
    return min(roots)


def extinction_by_generation(spec: BranchingSpec, n: int) -> float:
    """
    Probability that the process is extinct by generation ``n``: ``psi`` iterated
    ``n`` times at 0

    >>> extinction_by_generation(BranchingSpec(0, 2, 1.0), 1)
    0.5
    """
    q = 0.0
    for _ in range(n):
        q = spec.psi(q)
    return q


def percolated_extinction(D: int, p: float) -> float:
    """Extinction probability of the two-point law ``m=0, M=D, b=Dp`` dominating D-ary percolation"""
    return extinction_prob(BranchingSpec(0, D, D * p, p=p))


def edge_percolation_extinction(D: int, p: float, n: Optional[int] = None) -> float:
    """
    Extinction probability (by generation ``n``, or eventually) of the root cluster
    of a D-ary tree whose edges are kept independently with probability ``p``:
    fixed point of the binomial generating function ``(1 - p + p s)^D``.

    >>> round(edge_percolation_extinction(2, 0.6), 6)
    0.444444
    """
    def f(s):
        return (1 - p + p * s) ** D

    if n is not None:
        q = 0.0
        for _ in range(n):
            q = f(q)
        return q
    if D * p <= 1:
        return 1.0
    return float(optimize.bisect(lambda s: f(s) - s, 0.0, BISECT_UPPER, xtol=BISECT_XTOL, maxiter=200))


def simulate_branching(spec: BranchingSpec, n_runs: int, depth: int, seed: int = 0,
                       cap: int = DFLT_POPULATION_CAP) -> np.ndarray:
    """
    Generation-``depth`` population of ``n_runs`` independent processes with the
    two-point offspring law of ``spec``. Populations are capped at ``cap`` (a capped
    process is treated as surviving).
    """
    rng = make_rng(seed, 'branching')
    Z = np.ones(n_runs, dtype=np.int64)
    for _ in range(depth):
        n_max = rng.binomial(Z, spec.prob_max)
        Z = np.minimum(spec.m * (Z - n_max) + spec.M * n_max, cap)
        if not Z.any():
            break
    return Z


# --------------------------------------------------------------------------------------
# Tree percolation


@dataclass(frozen=True)
class RegularTree:
    """The deterministic tree where every node of depth < ``depth`` has ``branching`` children"""

    branching: int
    depth: int


@dataclass(frozen=True)
class PercolationResult:
    size: int
    depth_reached: int
    survived: bool


def _percolate_regular(tree: RegularTree, p: float, rng, mode: str) -> PercolationResult:
    Z, size, reached = 1, 1, 0
    for level in range(1, tree.depth + 1):
        if mode == 'edge':
            Z = int(rng.binomial(tree.branching * Z, p))
        else:
            Z = tree.branching * int(rng.binomial(Z, p))
        if Z == 0:
            break
        size += Z
        reached = level
    return PercolationResult(size, reached, reached == tree.depth)


def _percolate_edges(edges: dict, root, depth: int, p: float, rng, mode: str) -> PercolationResult:
    frontier_nodes, size, reached = [root], 1, 0
    for level in range(1, depth + 1):
        nxt = []
        for node in frontier_nodes:
            kids = list(edges.get(node, ()))
            if not kids:
                continue
            if mode == 'edge':
                keep = rng.random(len(kids)) < p
                nxt.extend(k for k, kept in zip(kids, keep) if kept)
            elif rng.random() < p:
                nxt.extend(kids)
        if not nxt:
            break
        size += len(nxt)
        reached = level
        frontier_nodes = nxt
    return PercolationResult(size, reached, reached == depth)


def percolate_tree(T, p: float, seed: int = 0, mode: str = DFLT_PERCOLATION_MODE,
                   trial: Optional[int] = None) -> PercolationResult:
    """
    Bernoulli percolation on a tree (a ``RegularTree`` or anything with ``root``,
    ``edges`` and ``depth``): returns the size of the root's retained cluster and
    whether it reaches the full depth.

    ``mode='edge'`` keeps every edge independently with probability ``p``;
    ``mode='vertex'`` keeps all the children of a node together with probability
    ``p`` (the two-point law ``m=0, M=D, b=Dp``).
    """
    if not 0 < p < 1:
        raise ValueError(f'p should be in (0, 1), was {p}')
    if mode not in ('edge', 'vertex'):
        raise ValueError(f"mode should be 'edge' or 'vertex', was {mode!r}")
    rng = make_rng(seed, 'percolation', trial)
    if isinstance(T, RegularTree):
        return _percolate_regular(T, p, rng, mode)
    return _percolate_edges(T.edges, T.root, T.depth, p, rng, mode)


def _survival_trial(trial, T, p, seed, mode):
    return percolate_tree(T, p, seed, mode, trial=trial).survived


def percolation_survival(T, p: float, n_seeds: int, seed: int = 0, mode: str = DFLT_PERCOLATION_MODE,
                         jobs: int = 1) -> float:
    """Fraction of seeds whose root cluster survives to the full depth"""
    survived = map_trials(partial(_survival_trial, T=T, p=p, seed=seed, mode=mode), n_seeds, jobs)
    return float(np.mean(survived))


def lyons_threshold(p: float, theta: float) -> float:
    """
    Dimension above which percolation with retention ``p`` survives, in metric base ``theta``

    >>> lyons_threshold(0.5, 2.0)
    1.0
    """
    return math.log(1 / p) / math.log(theta)


def tree_dimension_lower_bound(b: float, theta: float) -> float:
    """
    >>> round(tree_dimension_lower_bound(7, math.sqrt(7)), 12)
    2.0
    """
    return math.log(b) / math.log(theta)


# --------------------------------------------------------------------------------------
# Intervals


def wilson_interval(k: int, n: int, confidence: float = DFLT_CONFIDENCE) -> Tuple[float, float]:
    """
    Wilson score interval of a binomial proportion

    >>> lo, hi = wilson_interval(0, 100)
    >>> lo == 0.0 and 0 < hi < 0.05
    True
    """
    if n <= 0:
        raise ValueError(f'n should be positive, was {n}')
    z = stats.norm.ppf(0.5 + confidence / 2)
    phat = k / n
    denom = 1 + z ** 2 / n
    center = (phat + z ** 2 / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z ** 2 / (4 * n ** 2)) / denom
    lo = 0.0 if k == 0 else max(0.0, center - half)
    hi = 1.0 if k == n else min(1.0, center + half)
    return lo, hi


def jackknife(values: Sequence, statistic: Callable = np.mean) -> Tuple[float, float]:
    """
    ``(statistic(values), jackknife standard error)``

    >>> est, se = jackknife([1.0, 2.0, 3.0, 4.0])
    >>> est, round(se, 6)
    (2.5, 0.645497)
    """
    values = list(values)
    n = len(values)
    if n < 2:
        raise InsufficientDepthError(f'jackknife needs at least 2 values, got {n}')
    loo = np.array([statistic(values[:i] + values[i + 1:]) for i in range(n)], dtype=float)
    se = math.sqrt((n - 1) / n * float(((loo - loo.mean()) ** 2).sum()))
    return float(statistic(values)), se


# --------------------------------------------------------------------------------------
# Surround probability Monte Carlo

REGIMES = ('core', 'origin', 'boundary')


@dataclass(frozen=True, eq=False)
class MCEstimate:
    estimate: float
    ci: Tuple[float, float]
    n_trials: int
    seed: int
    params: dict
    trials: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            'estimate': self.estimate,
            'ci': list(self.ci),
            'n_trials': self.n_trials,
            'seed': self.seed,
            'params': self.params,
        }

    def to_dataframe(self) -> pd.DataFrame:
        return pd.DataFrame(self.trials)


def _uniform_in_core(rng, G, eta: float, max_tries: int = 10_000) -> complex:
    r = G.circumradius
    for _ in range(max_tries):
        z = G.center + complex(*rng.uniform(-r, r, size=2))
        if core_contains(G, eta, z):
            return z
    raise ResolutionError(f'no point of the eta={eta} core found in {max_tries} draws')


def _place_tile(regime: str, eta: float, r: float, seed: int, trial: int):
    """The tile for one trial, the path starting at the origin"""
    if regime == 'origin':
        offset = make_rng(seed, 'offset', trial).uniform(-0.5, 0.5, size=2)
        return HomotheticTile(complex(*offset), r)
    rng = make_rng(seed, 'start', trial)
    unit = HomotheticTile(0j, r)
    if regime == 'core':
        start = _uniform_in_core(rng, unit, eta)
    else:
        boundary = unit.sample_boundary(2, per_edge=4)
        start = boundary[rng.integers(len(boundary))]
    return HomotheticTile(-start, r)


def _raster_near(points: np.ndarray, G, eps: float) -> RasterSet:
    """Raster of the polyline segments that can meet ``G``"""
    p, q = points[:-1], points[1:]
    seg = np.hypot(*(q - p).T)
    reach = G.circumradius + seg + 2 * eps
    near = (np.hypot(p[:, 0] - G.center.real, p[:, 1] - G.center.imag) <= reach) | (
        np.hypot(q[:, 0] - G.center.real, q[:, 1] - G.center.imag) <= reach
    )
    return RasterSet(eps, rasterize_segments(p[near], q[near], eps))


def _surround_trial(trial, eta, r, seed, regime, eps, dt, n_steps_max, sampler):
    G = _place_tile(regime, eta, r, seed, trial)
    if sampler is None:
        path = sample_killed(n_steps_max, dt, seed=trial_seed(seed, trial))
        points = path.points
    else:
        points = np.asarray(sampler(trial_seed(seed, trial), G), dtype=float)
    K = _raster_near(points, G, eps)
    hit = bool(len(K)) and hits_core(K, G, eta)
    surrounds = bool(hit) and eta_surrounds(K, G, eta)
    return {'trial': trial, 'hits_core': hit, 'surrounds': surrounds, 'event': (not hit) or surrounds}


def surround_prob_mc(eta: float, r: float, trials: int, seed: int = 0, regime: str = 'core',
                     sampler: Optional[Callable] = None, eps: Optional[float] = None,
                     dt: Optional[float] = None, n_steps_max: int = 10 ** 7, jobs: int = 1
                     ) -> MCEstimate:
    """
    Monte Carlo probability of ``{K eta-surrounds G, or K misses core(G, eta)}`` for
    ``K`` a killed Brownian path from the origin and ``G`` a tile of diameter ``r``:

    - ``regime='core'``: the origin is a uniform point of ``core(G, eta)``
    - ``regime='boundary'``: the origin is a uniform point of the boundary of ``G``
    - ``regime='origin'``: ``G`` is centered at a uniform point of ``[-1/2, 1/2]^2``

    ``sampler(seed, G)`` replaces the Brownian path by any polyline (synthetic sets).
    The confidence interval is Wilson's.
    """
    if not 0 < eta < 0.1:
        raise ValueError(f'eta should be in (0, 1/10), was {eta}')
    if not 0 < r < 1:
        raise ValueError(f'r should be in (0, 1), was {r}')
    if regime not in REGIMES:
        raise ValueError(f'regime should be one of {REGIMES}, was {regime!r}')
    eps = eta * r / 10 if eps is None else eps
    dt = eps ** 2 if dt is None else dt
    func = partial(_surround_trial, eta=eta, r=r, seed=seed, regime=regime, eps=eps, dt=dt,
                   n_steps_max=n_steps_max, sampler=sampler)
    rows = map_trials(func, trials, jobs)
    k = sum(row['event'] for row in rows)
    logger.info('surround events: %d / %d (%s regime)', k, trials, regime)
    params = {'eta': eta, 'r': r, 'regime': regime, 'eps': eps, 'dt': dt}
    return MCEstimate(k / trials, wilson_interval(k, trials), trials, seed, params, rows)


# --------------------------------------------------------------------------------------
# Random walk outer boundary


def _srw_outer_trial(trial, ns, walks, seed):
    n = ns[trial // walks]
    walk = sample_srw(n, seed=trial_seed(seed, trial))
    return outer_boundary_lattice(walk.points)


def srw_outer_boundary_means(ns: Sequence[int], walks: int, seed: int = 0, jobs: int = 1
                             ) -> pd.DataFrame:
    """
    Mean and standard deviation of the outer boundary size of ``walks`` simple random
    walks of each length in ``ns``
    """
    ns = [int(n) for n in ns]
    counts = np.array(
        map_trials(partial(_srw_outer_trial, ns=ns, walks=walks, seed=seed), len(ns) * walks, jobs),
        dtype=float,
    ).reshape(len(ns), walks)
    return pd.DataFrame({
        'n': ns,
        'mean': counts.mean(axis=1),
        'std': counts.std(axis=1, ddof=1) if walks > 1 else np.zeros(len(ns)),
        'walks': walks,
    })
