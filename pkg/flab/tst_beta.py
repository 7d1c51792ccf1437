"""Beta numbers, traveling salesman sums and wiggliness scores over dyadic squares and tile blow-ups

Beta numbers are computed on finite samples of a set. For squares of diameter at
least ``r`` the sample spacing should be at most ``r / 10``.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import minimize_scalar
from scipy.spatial import ConvexHull, QhullError, cKDTree
from scipy.spatial.distance import pdist

from flab.gosper_tiling import (
    ABS_LAMBDA,
    TileAddress,
    as_complex,
    blow_up,
    lattice_near,
)
from flab.util import CapacityError

logger = logging.getLogger(__name__)

DFLT_MAX_SQUARES = 2_000_000
COLLINEAR_RTOL = 1e-12
BLOW_UP_EXPONENT = 5  # beta numbers of tiles are taken on lam^5 blow-ups


def _as_points(points) -> np.ndarray:
    """(N, 2) float array from complex values or coordinate pairs"""
    z = np.atleast_1d(as_complex(points)).ravel()
    return np.column_stack([z.real, z.imag])


def _is_collinear(pts: np.ndarray) -> bool:
    if len(pts) <= 2:
        return True
    centered = pts - pts.mean(axis=0)
    sv = np.linalg.svd(centered, compute_uv=False)
    return bool(sv[0] == 0 or sv[-1] <= COLLINEAR_RTOL * sv[0])


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _calipers_width(hull: np.ndarray) -> float:
    """Minimal width of a convex polygon given by its ccw vertices (rotating calipers)"""
    h = len(hull)
    best = math.inf
    j = 1
    for i in range(h):
        p, q = hull[i], hull[(i + 1) % h]
        while _cross(p, q, hull[(j + 1) % h]) > _cross(p, q, hull[j % h]):
            j += 1
        edge_len = math.hypot(q[0] - p[0], q[1] - p[1])
        best = min(best, _cross(p, q, hull[j % h]) / edge_len)
    return best


def minimal_width(points) -> float:
    """
    Minimal width of the convex hull of ``points``: the smallest distance between two
    parallel lines enclosing them. Collinear inputs (to a relative 1e-12) have width 0.

    >>> minimal_width([(0, 0), (1, 0), (1, 1), (0, 1)])
    1.0
    >>> minimal_width([(0, 0), (1, 1), (2, 2)])
    0.0
    """
    pts = np.unique(_as_points(points), axis=0)
    if _is_collinear(pts):
        return 0.0
    try:
        hull = ConvexHull(pts)
    except QhullError:
        # nearly flat: width across the principal direction
        centered = pts - pts.mean(axis=0)
        normal = np.linalg.svd(centered)[2][-1]
        proj = centered @ normal
        return float(proj.max() - proj.min())
    return float(_calipers_width(pts[hull.vertices]))


@dataclass(frozen=True)
class Box:
    """The closed axis-parallel box ``[xmin, xmax] x [ymin, ymax]``"""

    xmin: float
    xmax: float
    ymin: float
    ymax: float

    @property
    def diam(self) -> float:
        return math.hypot(self.xmax - self.xmin, self.ymax - self.ymin)

    @property
    def center(self) -> complex:
        return complex((self.xmin + self.xmax) / 2, (self.ymin + self.ymax) / 2)

    def contains(self, z) -> np.ndarray:
        pts = _as_points(z)
        x, y = pts[:, 0], pts[:, 1]
        return (x >= self.xmin) & (x <= self.xmax) & (y >= self.ymin) & (y <= self.ymax)


def _points_in(points, S) -> np.ndarray:
    pts = _as_points(points)
    if not len(pts):
        return pts
    return pts[np.asarray(S.contains(pts), dtype=bool).reshape(-1)]


def beta(points, S) -> float:
    """
    ``beta_E(S)``: the smallest ``sup dist(z, L)`` over lines ``L`` for the points
    ``z`` of ``E`` in ``S``, divided by ``diam(S)``. ``S`` is anything with a
    ``contains`` method and a ``diam`` (a ``Box``, a tile, a blow-up).

    >>> round(beta([(0, 0), (1, 0), (1, 1), (0, 1)], Box(0, 1, 0, 1)), 5)
    0.35355
    >>> beta([(0, 0), (0.5, 0.5), (1, 1)], Box(0, 1, 0, 1))
    0.0
    """
    if not S.diam > 0:
        raise ValueError(f'S should have a positive diameter, was {S.diam}')
    inside = _points_in(points, S)
    if len(inside) <= 2:
        return 0.0
    return minimal_width(inside) / 2 / S.diam


def _projected_width(pts: np.ndarray, angle: float) -> float:
    proj = pts[:, 1] * math.cos(angle) - pts[:, 0] * math.sin(angle)
    return float(proj.max() - proj.min())


def beta_bruteforce(points, S, n_angles: int = 10_000, n_refine: int = 8) -> float:
    """
    ``beta`` by line search: for each direction the best offset is the midline of
    the projection range, so only the angle is searched (a grid, then bounded scalar
    minimization around the best grid angles).
    """
    if not S.diam > 0:
        raise ValueError(f'S should have a positive diameter, was {S.diam}')
    pts = _points_in(points, S)
    if len(pts) <= 2:
        return 0.0
    pts = pts - pts.mean(axis=0)
    angles = np.arange(n_angles) * math.pi / n_angles
    proj = pts[:, 1][None, :] * np.cos(angles)[:, None] - pts[:, 0][None, :] * np.sin(angles)[:, None]
    widths = proj.max(axis=1) - proj.min(axis=1)
    step = math.pi / n_angles
    best = float(widths.min())
    for idx in np.argsort(widths)[:n_refine]:
        res = minimize_scalar(
            lambda a: _projected_width(pts, a),
            bounds=(angles[idx] - step, angles[idx] + step),
            method='bounded',
            options={'xatol': 1e-12},
        )
        best = min(best, float(res.fun))
    return best / 2 / S.diam


# --------------------------------------------------------------------------------------
# Dyadic squares and traveling salesman sums


@dataclass(frozen=True, order=True)
class DyadicSquare:
    """``[i 2^-j, (i+1) 2^-j] x [k 2^-j, (k+1) 2^-j]``"""

    level: int
    i: int
    k: int

    @property
    def side(self) -> float:
        return 2.0 ** (-self.level)

    @property
    def diam(self) -> float:
        return self.side * math.sqrt(2)

    def box(self) -> Box:
        s = self.side
        return Box(self.i * s, (self.i + 1) * s, self.k * s, (self.k + 1) * s)

    def expanded(self, factor: int = 3) -> Box:
        """The concentric square ``factor`` times larger (3x3 grid with Q in the middle)"""
        s = self.side
        pad = (factor - 1) / 2 * s
        return Box(self.i * s - pad, (self.i + 1) * s + pad, self.k * s - pad, (self.k + 1) * s + pad)


def _cell_indices(pts: np.ndarray, level: int) -> np.ndarray:
    return np.floor(pts * 2 ** level).astype(np.int64)


def _closed_cells(pts: np.ndarray, level: int) -> np.ndarray:
    """Level cells whose closure holds a point: two or four of them for points on grid lines"""
    scaled = pts * 2 ** level
    cells = np.floor(scaled).astype(np.int64)
    on_x, on_y = scaled[:, 0] == cells[:, 0], scaled[:, 1] == cells[:, 1]
    out = [cells]
    for (dx, dy), on in (((1, 0), on_x), ((0, 1), on_y), ((1, 1), on_x & on_y)):
        out.append(cells[on] - (dx, dy))
    return np.unique(np.vstack(out), axis=0)


def dyadic_squares_meeting(E, j: int) -> list:
    """
    The level-``j`` squares ``Q`` whose closed ``3 (.) Q`` meets ``E``.

    >>> len(dyadic_squares_meeting([(0.3, 0.3)], 2))
    9
    >>> sorted(dyadic_squares_meeting([(0.5, 0.5)], 1))[:2]
    [DyadicSquare(level=1, i=-1, k=-1), DyadicSquare(level=1, i=-1, k=0)]
    >>> len(dyadic_squares_meeting([(0.5, 0.5)], 1))
    16
    """
    cells = _closed_cells(_as_points(E), j)
    offs = np.array([(a, b) for a in (-1, 0, 1) for b in (-1, 0, 1)])
    squares = np.unique((cells[:, None, :] + offs[None, :, :]).reshape(-1, 2), axis=0)
    return [DyadicSquare(j, int(i), int(k)) for i, k in squares]


def set_diameter(E) -> float:
    """Largest distance between two points of the finite set ``E``"""
    pts = np.unique(_as_points(E), axis=0)
    if len(pts) < 2:
        return 0.0
    if len(pts) > 3 and not _is_collinear(pts):
        try:
            pts = pts[ConvexHull(pts).vertices]
        except QhullError:
            pass
    return float(pdist(pts).max())


@dataclass(frozen=True, eq=False)
class BetaAtlas:
    """
    Beta numbers ``beta_E(3 (.) Q)`` keyed by ``(level, i, k)`` of the squares of the
    grid anchored at ``offset`` with unit side ``scale``, and the sum
    ``diam(E) + sum beta^2 diam(Q)`` in the units of ``E``.
    """

    entries: Dict[Tuple[int, int, int], float]
    sum: float
    diam_E: float
    scale: float = 1.0
    offset: Tuple[float, float] = (0.0, 0.0)
    j_max: int = 0
    level_sums: Dict[int, float] = field(default_factory=dict)

    def to_dataframe(self) -> pd.DataFrame:
        rows = [
            (level, i, k, b, self.scale * 2.0 ** (-level) * math.sqrt(2))
            for (level, i, k), b in sorted(self.entries.items())
        ]
        return pd.DataFrame(rows, columns=['level', 'i', 'k', 'beta', 'diam'])

    def write_csv(self, filepath: str) -> str:
        self.to_dataframe().to_csv(filepath, index=False)
        return filepath

    def to_dict(self) -> dict:
        return {'diam': self.diam_E, 'sum': self.sum, 'j_max': self.j_max}


def tst_sum(E, j_max: int, max_squares: int = DFLT_MAX_SQUARES, j_min: int = 0) -> BetaAtlas:
    """
    Traveling salesman sum of the finite set ``E`` over the dyadic squares of levels
    ``j_min..j_max`` whose tripled square meets ``E``. ``E`` is first mapped into the
    unit square (translation and a uniform scaling), so the grid does not depend on
    where ``E`` sits.

    >>> atlas = tst_sum([(t, 0.0) for t in np.linspace(0, 1, 50)], 5)
    >>> atlas.sum
    1.0
    """
    pts = np.unique(_as_points(E), axis=0)
    if not len(pts):
        raise ValueError('E should be nonempty')
    if j_max < j_min:
        raise ValueError(f'j_max={j_max} is below j_min={j_min}')
    diam_E = set_diameter(pts)
    offset = pts.min(axis=0)
    scale = float(np.ptp(pts, axis=0).max()) or 1.0
    unit = (pts - offset) / scale
    entries, level_sums = {}, {}
    total, n_squares = diam_E, 0
    for j in range(j_min, j_max + 1):
        squares = dyadic_squares_meeting(unit, j)
        n_squares += len(squares)
        if n_squares > max_squares:
            raise CapacityError(f'{n_squares} squares up to level {j} exceed max_squares={max_squares}')
        cells = _cell_indices(unit, j)
        order = np.lexsort((cells[:, 1], cells[:, 0]))
        keys, starts, counts = np.unique(cells[order], axis=0, return_index=True, return_counts=True)
        buckets = {
            (int(a), int(b)): order[s:s + c] for (a, b), s, c in zip(keys, starts, counts)
        }
        diam_Q = 2.0 ** (-j) * math.sqrt(2)
        level_sum = 0.0
        for Q in squares:
            # half open cells i-1..i+2, then the closed 3x box
            idx = [
                buckets[(Q.i + a, Q.k + b)]
                for a in (-1, 0, 1, 2) for b in (-1, 0, 1, 2) if (Q.i + a, Q.k + b) in buckets
            ]
            local = unit[np.concatenate(idx)] if idx else unit[:0]
            local = local[Q.expanded(3).contains(local)]
            b = minimal_width(local) / 2 / (3 * diam_Q) if len(local) > 2 else 0.0
            entries[(j, Q.i, Q.k)] = b
            level_sum += b ** 2 * diam_Q * scale
        level_sums[j] = level_sum
        total += level_sum
        logger.debug('level %d: %d squares, sum += %g', j, len(squares), level_sum)
    return BetaAtlas(entries, total, diam_E, scale, (float(offset[0]), float(offset[1])), j_max,
                     level_sums)


# --------------------------------------------------------------------------------------
# Tile blow-ups


def tiles_with_blow_up_meeting(E, level: int, theta: float = ABS_LAMBDA ** BLOW_UP_EXPONENT,
                               max_tiles: int = DFLT_MAX_SQUARES) -> list:
    """Level-``level`` tiles whose ``theta`` blow-up (conservatively) meets ``E``"""
    pts = _as_points(E)
    radius = 0.5 * theta * ABS_LAMBDA ** (-level) * 1.01
    coords = lattice_near(pts[:, 0] + 1j * pts[:, 1], level, radius)
    if len(coords) > max_tiles:
        raise CapacityError(f'{len(coords)} tiles at level {level} exceed max_tiles={max_tiles}')
    tree = cKDTree(pts)
    out = []
    for a, b in coords:
        G = TileAddress(level, int(a), int(b))
        region = blow_up(G, theta)
        near = tree.query_ball_point([G.center.real, G.center.imag], region.circumradius)
        if near and np.any(region.contains(pts[near], 2)):
            out.append(G)
    return out


def _tile_beta_terms(pts: np.ndarray, tree: cKDTree, tiles: Iterable[TileAddress]) -> float:
    theta = ABS_LAMBDA ** BLOW_UP_EXPONENT
    total = 0.0
    for G in tiles:
        region = blow_up(G, theta)
        near = tree.query_ball_point([G.center.real, G.center.imag], region.circumradius)
        if len(near) <= 2:
            continue
        total += beta(pts[near], region) ** 2 * G.diam
    return total


def curve_length_floor(E, r: float, tiles: bool = False, max_squares: int = DFLT_MAX_SQUARES) -> float:
    """
    ``diam(E) + sum beta^2 diam`` over the dyadic squares (or, with ``tiles=True``,
    the ``lam^5`` blow-ups of the tiles) of diameter at least ``r``: a raw score
    bounding below the length of any curve through ``E``, up to a universal constant.

    >>> curve_length_floor([(0, 0), (0.5, 0), (1, 0)], 0.01)
    1.0
    """
    if not r > 0:
        raise ValueError(f'r should be positive, was {r}')
    pts = np.unique(_as_points(E), axis=0)
    if not tiles:
        scale = float(np.ptp(pts, axis=0).max()) or 1.0
        # squares of level j have diam scale * sqrt(2) * 2^-j
        j_max = math.floor(math.log2(scale * math.sqrt(2) / r))
        if j_max < 0:
            return set_diameter(pts)
        return tst_sum(pts, j_max, max_squares).sum
    n_max = math.floor(-2 * math.log(r) / math.log(7))
    total = set_diameter(pts)
    tree = cKDTree(pts)
    for n in range(0, n_max + 1):
        total += _tile_beta_terms(pts, tree, tiles_with_blow_up_meeting(pts, n, max_tiles=max_squares))
    return total


def _tile_points(U: Sequence[TileAddress], sample: str, g: int) -> np.ndarray:
    if sample == 'centers':
        z = np.array([G.center for G in U])
    elif sample == 'boundary':
        z = np.concatenate([G.polygon(g) for G in U])
    else:
        raise ValueError(f"sample should be 'centers' or 'boundary', was {sample!r}")
    return _as_points(z)


def wiggliness_score(gamma_len: float, U: Sequence[TileAddress], tiles: Sequence[TileAddress],
                     n: Optional[int] = None, sample: str = 'centers', g: int = 1) -> float:
    """
    ``|lam|^n (-gamma_len + sum_{G' in tiles} beta_U(lam^5 (.) G')^2 diam(G'))`` where
    the set ``U`` of level-n tiles is sampled by its tile centers (or polygon
    vertices, ``sample='boundary'``). Predicts the size of a Whitney wall.
    """
    U = list(U)
    if not U:
        raise ValueError('U should be nonempty')
    n = max(G.level for G in U) if n is None else n
    too_deep = [G for G in tiles if G.level > n]
    if too_deep:
        raise ValueError(f'tiles should have level <= {n}, got {too_deep[0]}')
    pts = _tile_points(U, sample, g)
    terms = _tile_beta_terms(pts, cKDTree(pts), tiles)
    return ABS_LAMBDA ** n * (terms - gamma_len)


def wiggliness_candidates(U: Sequence[TileAddress], levels: Iterable[int]) -> list:
    """Tiles of the given levels whose ``lam^5`` blow-up meets the centers of ``U``"""
    pts = _tile_points(list(U), 'centers', 1)
    out = []
    for level in levels:
        out.extend(tiles_with_blow_up_meeting(pts, level))
    return out
