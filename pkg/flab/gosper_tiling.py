"""Gosper island tiling: construction, addressing, blow-ups, cores and tiling constants

Tiles live in a hierarchy: a tile of level ``n`` is the image of the Gosper
island ``G0`` (normalized to diameter 1, centered at 0) under
``z -> S * lam**(-n) * (z + c)`` where ``c = a + b*omega`` is an Eisenstein
integer, ``omega = exp(i pi/3)`` and ``lam = 2 + omega`` (so ``|lam| = sqrt(7)``).
All parent / child / neighbor arithmetic is exact integer arithmetic on ``(a, b)``.
Geometric queries use the generation ``g`` polygonal approximations of the
boundary, with a conservative margin given by the limiting substitution deviation.
"""

import json
import logging
import math
import os
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
import shapely
import sympy as sp
from scipy import ndimage, optimize
from scipy.spatial import ConvexHull, cKDTree
from scipy.spatial.distance import pdist

from flab.config import DFLT_CONFIG, env_config
from flab.util import CapacityError, ConstantsError

logger = logging.getLogger(__name__)

OMEGA = complex(0.5, math.sqrt(3) / 2)
LAMBDA = 2 + OMEGA  # (5 + i sqrt(3)) / 2
ABS_LAMBDA = math.sqrt(7)

# 0 and the six units, counter clockwise: a complete residue system mod LAMBDA
DIGITS = ((0, 0), (1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1))
UNITS = DIGITS[1:]

EXACT_CONSTANTS = {
    'step_deviation': sp.sqrt(3) / 14,
    'limit_deviation': sp.sqrt(21) / (14 * (sp.sqrt(7) - 1)),
    'boundary_dimension': sp.log(3) / sp.log(sp.sqrt(7)),
    'holder_exponent': sp.log(7) / (2 * sp.log(3)),
}
STEP_DEVIATION = float(EXACT_CONSTANTS['step_deviation'])  # 0.1237179...
LIMIT_DEVIATION = float(EXACT_CONSTANTS['limit_deviation'])  # 0.1988921...
BOUNDARY_DIMENSION = float(EXACT_CONSTANTS['boundary_dimension'])  # 1.1291500...
HOLDER_EXPONENT = float(EXACT_CONSTANTS['holder_exponent'])

NORMALIZATION_GENERATION = 8
DFLT_GENERATION = 4
DFLT_MAX_GENERATION = int(env_config().get('max_generation', DFLT_CONFIG['max_generation']))
_limits = {'max_generation': DFLT_MAX_GENERATION}
DFLT_CONSTANTS_GENERATION = 5
CONSTANTS_VERSION = 1
DFLT_CONSTANTS_FILEPATH = os.path.join(
    os.path.dirname(os.path.abspath(__file__)), 'data', 'tiling_constants.json'
)


# --------------------------------------------------------------------------------------
# Eisenstein integer arithmetic


def eis_mul(p, q):
    """
    Product of ``a + b omega`` and ``c + d omega`` (using ``omega**2 = omega - 1``)

    >>> eis_mul((2, 1), (3, -1))  # lam * conj(lam) = 7
    (7, 0)
    """
    (a, b), (c, d) = p, q
    return (a * c - b * d, a * d + b * c + b * d)


def eis_norm(p) -> int:
    """
    ``|a + b omega|**2``

    >>> eis_norm((2, 1))
    7
    """
    a, b = p
    return a * a + a * b + b * b


def eis_to_complex(a, b):
    """``a + b omega`` as complex number(s)"""
    return np.asarray(a) + np.asarray(b) * OMEGA


def eis_round(w):
    """
    Nearest Eisenstein integer(s) of complex ``w`` (hexagonal cube-coordinate rounding).
    Returns two integer arrays ``(a, b)``.

    >>> eis_round(0.9 + 0.05j)
    (array(1), array(0))
    >>> eis_round(OMEGA * 1.1)
    (array(0), array(1))
    """
    w = np.asarray(w, dtype=complex)
    b = w.imag / (math.sqrt(3) / 2)
    a = w.real - b / 2
    s = -a - b
    ra, rb, rs = np.rint(a), np.rint(b), np.rint(s)
    da, db, ds = np.abs(ra - a), np.abs(rb - b), np.abs(rs - s)
    fix_a = (da > db) & (da > ds)
    fix_b = ~fix_a & (db > ds)
    ra = np.where(fix_a, -rb - rs, ra)
    rb = np.where(fix_b, -ra - rs, rb)
    return ra.astype(np.int64), rb.astype(np.int64)


def hex_disk(radius: int) -> np.ndarray:
    """
    Eisenstein integers within hexagonal distance ``radius`` of 0, as an (N, 2) array

    >>> len(hex_disk(0)), len(hex_disk(1)), len(hex_disk(2))
    (1, 7, 19)
    """
    rng = np.arange(-radius, radius + 1)
    a, b = np.meshgrid(rng, rng, indexing='ij')
    a, b = a.ravel(), b.ravel()
    keep = np.abs(a + b) <= radius
    return np.column_stack([a[keep], b[keep]])


def mul_lambda(p):
    """
    ``lam * (a + b omega)``

    >>> mul_lambda((1, 0))
    (2, 1)
    """
    a, b = p
    return (2 * a - b, a + 3 * b)


def divmod_lambda(p):
    """
    Split ``p`` as ``lam * q + d`` with ``d`` in ``DIGITS``; returns ``(q, d)``.

    >>> divmod_lambda(mul_lambda((3, -2)))
    ((3, -2), (0, 0))
    >>> divmod_lambda((3, 1))
    ((1, 0), (1, 0))
    """
    a, b = p
    for da, db in DIGITS:
        # (c) * conj(lam) must be divisible by 7
        ca, cb = a - da, b - db
        ta, tb = 3 * ca + cb, 2 * cb - ca
        if ta % 7 == 0 and tb % 7 == 0:
            return (ta // 7, tb // 7), (da, db)
    raise AssertionError(f'DIGITS is not a residue system mod lambda (at {p})')


def as_complex(z) -> np.ndarray:
    """
    Points as a complex array: accepts complex scalars/arrays and real
    ``(..., 2)`` coordinate arrays.

    >>> as_complex([1.0, 2.0])
    array(1.+2.j)
    >>> as_complex([[0, 0], [1, 1]])
    array([0.+0.j, 1.+1.j])
    """
    arr = np.asarray(z)
    if np.iscomplexobj(arr):
        return arr.astype(complex)
    arr = arr.astype(float)
    if arr.ndim == 0:
        return arr.astype(complex)
    if arr.shape[-1] != 2:
        raise ValueError(
            'points should be complex numbers or (..., 2) arrays of coordinates'
        )
    return arr[..., 0] + 1j * arr[..., 1]


# --------------------------------------------------------------------------------------
# Boundary polygons


def set_max_generation(max_generation: int) -> int:
    """
    Set the largest polygon generation computations may use (the ``max_generation``
    config key). Returns the previous limit.

    >>> previous = set_max_generation(6)
    >>> current_max_generation()
    6
    >>> _ = set_max_generation(previous)
    """
    if int(max_generation) != max_generation or max_generation < 0:
        raise ValueError(f'max_generation should be a non-negative integer, was {max_generation}')
    previous = _limits['max_generation']
    _limits['max_generation'] = int(max_generation)
    return previous


def current_max_generation() -> int:
    return _limits['max_generation']


def _check_generation(g, max_generation=None):
    if int(g) != g or g < 0:
        raise ValueError(f'generation should be a non-negative integer, was {g}')
    max_generation = _limits['max_generation'] if max_generation is None else max_generation
    if g > max_generation:
        raise CapacityError(
            f'generation {g} exceeds the configured maximum {max_generation} '
            f'({6 * 3 ** g} vertices)'
        )
    return int(g)


@lru_cache(maxsize=None)
def _lattice_vertices(g: int) -> np.ndarray:
    """Generation-g boundary of G0 in lattice units (level-0 centers are Z[omega])"""
    if g == 0:
        verts = (1 + OMEGA) / 3 * OMEGA ** np.arange(6)
    else:
        p = _lattice_vertices(g - 1)
        v = np.roll(p, -1) - p
        verts = np.empty(3 * len(p), dtype=complex)
        verts[0::3] = p
        verts[1::3] = p + v / LAMBDA
        verts[2::3] = p + v * (1 + OMEGA) / LAMBDA
    verts.setflags(write=False)
    return verts


def segment_lattice_length(g: int) -> float:
    """Edge length of the generation-g polygon in lattice units"""
    return 7 ** (-g / 2) / math.sqrt(3)


def lattice_margin(g: int) -> float:
    """How far the true boundary can be from the generation-g polygon (lattice units)"""
    return LIMIT_DEVIATION * segment_lattice_length(g)


@lru_cache(maxsize=1)
def tile_scale() -> float:
    """
    The factor ``S`` mapping lattice units to world units, so that ``G0`` has diameter 1.
    Computed from the hull of the generation-8 polygon.
    """
    verts = _lattice_vertices(NORMALIZATION_GENERATION)
    xy = np.column_stack([verts.real, verts.imag])
    hull = xy[ConvexHull(xy).vertices]
    return 1.0 / pdist(hull).max()


@lru_cache(maxsize=None)
def _local_polygon(g: int):
    verts = _lattice_vertices(g)
    poly = shapely.Polygon(np.column_stack([verts.real, verts.imag]))
    shapely.prepare(poly)
    return poly


@lru_cache(maxsize=None)
def _local_ring(g: int):
    ring = _local_polygon(g).exterior
    shapely.prepare(ring)
    return ring


def _local_depth(w: np.ndarray, g: int) -> np.ndarray:
    """Signed distance (positive inside) of lattice-frame points to the generation-g polygon"""
    w = np.asarray(w, dtype=complex)
    flat = w.ravel()
    inside = shapely.contains_xy(_local_polygon(g), flat.real, flat.imag)
    dist = shapely.distance(_local_ring(g), shapely.points(flat.real, flat.imag))
    return np.where(inside, dist, -dist).reshape(w.shape)


@dataclass(frozen=True, eq=False)
class BoundaryPolygon:
    """Generation-g approximation of the boundary of G0 (diameter 1, centered at 0)"""

    generation: int
    vertices: np.ndarray  # complex, counter clockwise

    def __len__(self):
        return len(self.vertices)

    @property
    def xy(self) -> np.ndarray:
        return np.column_stack([self.vertices.real, self.vertices.imag])

    @property
    def segment_length(self) -> float:
        return tile_scale() * segment_lattice_length(self.generation)

    @property
    def deviation_margin(self) -> float:
        return LIMIT_DEVIATION * self.segment_length

    def to_shapely(self):
        return shapely.Polygon(self.xy)

    @property
    def is_simple(self) -> bool:
        return is_simple(self.vertices)


def boundary_polygon(g: int, max_generation: Optional[int] = None) -> BoundaryPolygon:
    """
    The generation-g polygonal approximation of the boundary of the Gosper island.

    >>> len(boundary_polygon(0)), len(boundary_polygon(1)), len(boundary_polygon(2))
    (6, 18, 54)
    """
    g = _check_generation(g, max_generation)
    return BoundaryPolygon(g, tile_scale() * _lattice_vertices(g))


def is_simple(polygon) -> bool:
    """Whether the closed polygon (complex vertices or (N, 2) array) is a Jordan curve"""
    verts = as_complex(polygon)
    ring = shapely.LinearRing(np.column_stack([verts.real, verts.imag]))
    return bool(ring.is_simple and shapely.Polygon(ring).is_valid)


# --------------------------------------------------------------------------------------
# Tile shaped regions


class _TileGeometry:
    """
    Geometry shared by tiles, scaled tiles and blow-ups: all are images of G0 under
    ``w -> center + w / local_factor`` applied to lattice-frame points ``w``.
    """

    center: complex
    diam: float
    local_factor: complex

    def to_local(self, z) -> np.ndarray:
        return (as_complex(z) - self.center) * self.local_factor

    def from_local(self, w) -> np.ndarray:
        return self.center + np.asarray(w, dtype=complex) / self.local_factor

    @property
    def world_per_lattice(self) -> float:
        return 1 / abs(self.local_factor)

    def polygon(self, g: int = DFLT_GENERATION) -> np.ndarray:
        """World coordinates of the generation-g boundary polygon (complex, ccw)"""
        return self.from_local(_lattice_vertices(_check_generation(g)))

    def shape(self, g: int = DFLT_GENERATION):
        verts = self.polygon(g)
        return shapely.Polygon(np.column_stack([verts.real, verts.imag]))

    def margin(self, g: int = DFLT_GENERATION) -> float:
        """Bound on the distance between the true boundary and the generation-g polygon"""
        return lattice_margin(g) * self.world_per_lattice

    @property
    def circumradius(self) -> float:
        # slack: the normalization is computed from a finite generation
        return 0.5 * self.diam * (1 + 1e-3)

    @property
    def inradius(self) -> float:
        return tile_inradius() * self.diam

    def depth(self, z, g: int = DFLT_GENERATION) -> np.ndarray:
        """Signed distance to the generation-g boundary (positive inside), world units"""
        return _local_depth(self.to_local(z), _check_generation(g)) * self.world_per_lattice

    def contains(self, z, g: int = DFLT_GENERATION, dilate: float = 0.0):
        """
        Conservative (dilated) membership: true for every point of the region, and
        possibly for points within ``margin(g) + dilate`` outside of it.
        """
        return _squeeze(self.depth(z, g) >= -(self.margin(g) + dilate), z)

    def surely_contains(self, z, g: int = DFLT_GENERATION, erode: float = 0.0):
        """Eroded membership: only true for points certainly inside the region"""
        return _squeeze(self.depth(z, g) > self.margin(g) + erode, z)

    def sample_boundary(self, g: int = DFLT_GENERATION, per_edge: int = 1) -> np.ndarray:
        """Points on the generation-g polygon, ``per_edge`` of them per edge"""
        verts = self.polygon(g)
        if per_edge <= 1:
            return verts
        t = np.arange(per_edge) / per_edge
        nxt = np.roll(verts, -1)
        return (verts[:, None] + (nxt - verts)[:, None] * t[None, :]).ravel()


def _squeeze(result, z):
    if as_complex(z).ndim == 0:
        return bool(np.asarray(result).reshape(()))
    return result


@dataclass(frozen=True, order=True)
class TileAddress(_TileGeometry):
    """
    A tile of the hierarchy: level ``n`` (the index ``||G||``) and the Eisenstein
    coordinate ``(a, b)`` of its center ``S * lam**(-n) * (a + b omega)``.
    """

    level: int
    a: int
    b: int

    @property
    def coord(self) -> Tuple[int, int]:
        return (self.a, self.b)

    @property
    def lattice_point(self) -> complex:
        return complex(self.a + self.b * OMEGA)

    @property
    def center(self) -> complex:
        return tile_scale() * LAMBDA ** (-self.level) * self.lattice_point

    @property
    def diam(self) -> float:
        return ABS_LAMBDA ** (-self.level)

    @property
    def local_factor(self) -> complex:
        return LAMBDA ** self.level / tile_scale()

    def to_dict(self) -> dict:
        return {'level': self.level, 'a': self.a, 'b': self.b}

    def __str__(self):
        return f'{self.level}:{self.a},{self.b}'


ORIGIN_TILE = TileAddress(0, 0, 0)


@dataclass(frozen=True)
class HomotheticTile(_TileGeometry):
    """``center + r * G0``: a tile shaped region of diameter ``r`` that need not be in the hierarchy"""

    center: complex
    r: float

    @property
    def diam(self) -> float:
        return self.r

    @property
    def local_factor(self) -> complex:
        return 1 / (self.r * tile_scale())


@dataclass(frozen=True)
class Region(_TileGeometry):
    """The blow-up ``theta (.) tile``: homothetic expansion of a tile about its center"""

    tile: _TileGeometry
    theta: float

    @property
    def center(self) -> complex:
        return self.tile.center

    @property
    def diam(self) -> float:
        return self.theta * self.tile.diam

    @property
    def local_factor(self) -> complex:
        return self.tile.local_factor / self.theta


# --------------------------------------------------------------------------------------
# Hierarchy operations


def children(A: TileAddress) -> List[TileAddress]:
    """
    The 7 level-(n+1) tiles whose union is ``A``, central child first.

    >>> [parent(c) == ORIGIN_TILE for c in children(ORIGIN_TILE)]
    [True, True, True, True, True, True, True]
    """
    a, b = mul_lambda(A.coord)
    return [TileAddress(A.level + 1, a + da, b + db) for da, db in DIGITS]


def parent(A: TileAddress) -> TileAddress:
    """
    The level-(n-1) tile containing ``A`` (exact division by lambda)

    >>> parent(children(ORIGIN_TILE)[0])
    TileAddress(level=0, a=0, b=0)
    """
    (qa, qb), _ = divmod_lambda(A.coord)
    return TileAddress(A.level - 1, qa, qb)


def ancestor(A: TileAddress, k: int = 1) -> TileAddress:
    """The k-fold parent of ``A``"""
    if k < 0:
        raise ValueError(f'k should be non-negative, was {k}')
    for _ in range(k):
        A = parent(A)
    return A


def neighbors(A: TileAddress) -> List[TileAddress]:
    """
    The six same-level tiles sharing boundary with ``A``

    >>> len(neighbors(ORIGIN_TILE)), ORIGIN_TILE in neighbors(ORIGIN_TILE)
    (6, False)
    """
    return [TileAddress(A.level, A.a + da, A.b + db) for da, db in UNITS]


def digit_path(A: TileAddress, k: Optional[int] = None) -> Tuple[TileAddress, List[int]]:
    """
    The digits (indices into ``DIGITS``) leading from ``ancestor(A, k)`` down to ``A``.
    By default ``k`` goes up to level 0.

    >>> root, digits = digit_path(from_digit_path([3, 0, 5]))
    >>> root, digits
    (TileAddress(level=0, a=0, b=0), [3, 0, 5])
    """
    k = A.level if k is None else k
    digits = []
    for _ in range(k):
        q, d = divmod_lambda(A.coord)
        digits.append(DIGITS.index(d))
        A = TileAddress(A.level - 1, *q)
    return A, digits[::-1]


def from_digit_path(digits: Iterable[int], root: TileAddress = ORIGIN_TILE) -> TileAddress:
    """The descendant of ``root`` reached by following ``digits``"""
    A = root
    for digit in digits:
        A = children(A)[digit]
    return A


def touches(A: TileAddress, B: TileAddress) -> bool:
    """
    Whether tiles of possibly different levels are adjacent (share boundary without
    one containing the other), decided combinatorially.

    >>> touches(ORIGIN_TILE, TileAddress(0, 1, 0)), touches(ORIGIN_TILE, TileAddress(0, 2, 0))
    (True, False)
    """
    if A.level > B.level:
        A, B = B, A
    diff = B.level - A.level
    if diff == 0:
        return B in neighbors(A)
    if ancestor(B, diff) == A:
        return False
    return any(ancestor(N, diff) == A for N in neighbors(B))


def tile_polygon(A: _TileGeometry, g: int = DFLT_GENERATION) -> np.ndarray:
    """World coordinates (complex) of the generation-g polygon of a tile or region"""
    return A.polygon(g)


def blow_up(A: _TileGeometry, theta: float) -> Region:
    """
    ``theta (.) A``: homothetic expansion of ``A`` about its center.

    >>> blow_up(ORIGIN_TILE, 1).diam == ORIGIN_TILE.diam
    True
    """
    if not theta > 0:
        raise ValueError(f'theta should be positive, was {theta}')
    return Region(A, float(theta))


def locate_many(
    z, n: int, g: int = DFLT_GENERATION, max_generation: Optional[int] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Lattice coordinates ``(a, b)`` of the level-n tiles containing the points ``z``.

    The nearest lattice point and its six neighbors are the only candidates; the
    polygon generation is refined for points within the deviation margin, and points
    still undecided at ``max_generation`` go to the lexicographically smallest
    candidate whose polygon is within the margin.
    """
    z = as_complex(z).ravel()
    max_generation = g + 4 if max_generation is None else max_generation
    w = z * LAMBDA ** n / tile_scale()
    a0, b0 = eis_round(w)
    offsets = np.array(DIGITS)
    cand_a = a0[:, None] + offsets[:, 0]
    cand_b = b0[:, None] + offsets[:, 1]
    local = w[:, None] - eis_to_complex(cand_a, cand_b)
    out_a, out_b = a0.copy(), b0.copy()
    pending = np.arange(len(z))
    depth = None
    for gen in range(g, max_generation + 1):
        if not len(pending):
            break
        depth = _local_depth(local[pending], gen)
        sure = depth > lattice_margin(gen)
        hit = sure.any(axis=1)
        idx = sure.argmax(axis=1)
        rows = pending[hit]
        out_a[rows] = cand_a[rows, idx[hit]]
        out_b[rows] = cand_b[rows, idx[hit]]
        pending, depth = pending[~hit], depth[~hit]
    for row, row_depth in zip(pending, depth if depth is not None else []):
        close = row_depth >= -lattice_margin(max_generation)
        if not close.any():
            close = row_depth == row_depth.max()
        options = sorted(zip(cand_a[row][close], cand_b[row][close]))
        out_a[row], out_b[row] = options[0]
    return out_a, out_b


def locate(z, n: int, g: int = DFLT_GENERATION, max_generation: Optional[int] = None) -> TileAddress:
    """
    The level-n tile containing ``z``

    >>> locate(0j, 0)
    TileAddress(level=0, a=0, b=0)
    >>> A = TileAddress(3, 5, -2)
    >>> locate(A.center, 3) == A
    True
    """
    a, b = locate_many(np.atleast_1d(as_complex(z)), n, g, max_generation)
    return TileAddress(int(n), int(a[0]), int(b[0]))


def core_contains(A: _TileGeometry, eta: float, z, g: int = DFLT_GENERATION):
    """
    Whether ``z`` is (certainly) in ``core(A, eta)``: inside ``A`` at distance more
    than ``eta * diam(A)`` from its complement.

    >>> core_contains(ORIGIN_TILE, 0.05, 0j)
    True
    >>> core_contains(ORIGIN_TILE, 0.05, boundary_polygon(3).vertices[0])
    False
    """
    if not 0 < eta < 1:
        raise ValueError(f'eta should be in (0, 1), was {eta}')
    return A.surely_contains(z, g, erode=eta * A.diam)


def lattice_near(z, level: int, radius: float) -> np.ndarray:
    """
    Unique lattice coordinates (an (N, 2) array) of level-``level`` tile centers within
    ``radius`` (world units) of at least one of the points ``z``. The candidate set may
    include a few more tiles than strictly necessary, never fewer.
    """
    z = np.atleast_1d(as_complex(z)).ravel()
    if not len(z):
        return np.empty((0, 2), dtype=np.int64)
    scale = tile_scale() * ABS_LAMBDA ** (-level)  # lattice spacing in world units
    a, b = eis_round(z * LAMBDA ** level / tile_scale())
    snapped = np.unique(np.column_stack([a, b]), axis=0)
    # the snapped point is within 1/sqrt(3) lattice units of the original
    k = int(math.ceil(radius / scale / (math.sqrt(3) / 2) + 1 / math.sqrt(3))) + 1
    disk = hex_disk(k)
    cand = (snapped[:, None, :] + disk[None, :, :]).reshape(-1, 2)
    return np.unique(cand, axis=0)


def tiles_in_window(level: int, window: Sequence[float], max_tiles: int = 5_000_000) -> List[TileAddress]:
    """
    Level-``level`` tiles meeting the box ``window = (xmin, xmax, ymin, ymax)``
    (conservatively: tiles whose center is within a circumradius of the box).
    """
    xmin, xmax, ymin, ymax = window
    pad = 0.5 * ABS_LAMBDA ** (-level) * 1.01
    corners = np.array([xmin - pad + 1j * (ymin - pad), xmax + pad + 1j * (ymin - pad),
                        xmin - pad + 1j * (ymax + pad), xmax + pad + 1j * (ymax + pad)])
    w = corners * LAMBDA ** level / tile_scale()
    bs = w.imag / (math.sqrt(3) / 2)
    as_ = w.real - bs / 2
    a_rng = np.arange(math.floor(as_.min()) - 1, math.ceil(as_.max()) + 2)
    b_rng = np.arange(math.floor(bs.min()) - 1, math.ceil(bs.max()) + 2)
    if len(a_rng) * len(b_rng) > max_tiles:
        raise CapacityError(
            f'{len(a_rng) * len(b_rng)} candidate tiles at level {level} exceed {max_tiles}'
        )
    a, b = np.meshgrid(a_rng, b_rng, indexing='ij')
    a, b = a.ravel(), b.ravel()
    centers = tile_scale() * LAMBDA ** (-level) * eis_to_complex(a, b)
    keep = (
        (centers.real >= xmin - pad) & (centers.real <= xmax + pad)
        & (centers.imag >= ymin - pad) & (centers.imag <= ymax + pad)
    )
    return [TileAddress(level, int(ai), int(bi)) for ai, bi in zip(a[keep], b[keep])]


# --------------------------------------------------------------------------------------
# Regions containing regions (sampled, conservative)


def region_contains_region(outer: _TileGeometry, inner: _TileGeometry, g: int = DFLT_GENERATION,
                           per_edge: int = 2) -> bool:
    """
    Whether ``inner`` is inside ``outer`` (up to the deviation margins), checked on a
    sample of the boundary of ``inner`` (enough for simply connected regions).
    """
    if abs(inner.center - outer.center) + inner.circumradius <= outer.inradius:
        return True
    if abs(inner.center - outer.center) - inner.circumradius > outer.circumradius + outer.margin(g):
        return False
    pts = inner.sample_boundary(g, per_edge)
    return bool(np.all(outer.contains(pts, g, dilate=inner.margin(g))))


def region_covered_by(region: _TileGeometry, covers: Sequence[_TileGeometry],
                      g: int = DFLT_GENERATION, n_grid: int = 40) -> bool:
    """
    Whether ``region`` is covered by the union of ``covers``, checked on a grid of
    points in ``region`` and on its boundary.
    """
    verts = region.polygon(g)
    xs = np.linspace(verts.real.min(), verts.real.max(), n_grid)
    ys = np.linspace(verts.imag.min(), verts.imag.max(), n_grid)
    grid = (xs[:, None] + 1j * ys[None, :]).ravel()
    pts = np.concatenate([grid[region.contains(grid, g)], region.sample_boundary(g, 2)])
    covered = np.zeros(len(pts), dtype=bool)
    for cover in covers:
        covered |= cover.contains(pts, g, dilate=region.margin(g))
    return bool(covered.all())


# --------------------------------------------------------------------------------------
# Substitution diagnostics


def _sample_polyline(verts: np.ndarray, per_edge: int) -> Tuple[np.ndarray, np.ndarray]:
    """Points along the closed polyline and the (edge, t) they come from"""
    t = np.arange(per_edge) / per_edge
    nxt = np.roll(verts, -1)
    pts = verts[:, None] + (nxt - verts)[:, None] * t[None, :]
    edge = np.repeat(np.arange(len(verts)), per_edge)
    return pts.ravel(), np.column_stack([edge, np.tile(t, len(verts))])


def _directed_hausdorff(source: np.ndarray, target: np.ndarray, per_edge: int = 8,
                        n_refine: int = 16) -> float:
    """sup over the source polyline of the distance to the target polyline"""
    target_line = shapely.LinearRing(np.column_stack([target.real, target.imag]))
    shapely.prepare(target_line)
    pts, where = _sample_polyline(source, per_edge)
    dense_target, _ = _sample_polyline(target, per_edge)
    approx, _ = cKDTree(np.column_stack([dense_target.real, dense_target.imag])).query(
        np.column_stack([pts.real, pts.imag])
    )
    best = np.argsort(approx)[-max(n_refine, 1) * 4:]
    exact = shapely.distance(target_line, shapely.points(pts[best].real, pts[best].imag))
    order = best[np.argsort(exact)[-n_refine:]]
    result = exact.max()
    nxt = np.roll(source, -1)
    for i in order:
        edge, t = int(where[i, 0]), where[i, 1]
        p, v = source[edge], nxt[edge] - source[edge]

        def neg_dist(s, p=p, v=v):
            q = p + v * s
            return -target_line.distance(shapely.Point(q.real, q.imag))

        lo, hi = max(0.0, t - 1 / per_edge), min(1.0, t + 1 / per_edge)
        res = optimize.minimize_scalar(neg_dist, bounds=(lo, hi), method='bounded',
                                       options={'xatol': 1e-12})
        result = max(result, -res.fun)
    return float(result)


def hausdorff_between_generations(g: int) -> float:
    """
    Hausdorff distance ``d_g`` between the generation ``g-1`` and ``g`` boundaries
    (world units). Successive values contract by ``1/sqrt(7)``.
    """
    if g < 1:
        raise ValueError(f'g should be at least 1, was {g}')
    coarse, fine = boundary_polygon(g - 1).vertices, boundary_polygon(g).vertices
    return max(_directed_hausdorff(coarse, fine), _directed_hausdorff(fine, coarse))


def _point_segment_distance(pts, p, q):
    v = q - p
    t = np.clip(((pts - p) * np.conj(v)).real / abs(v) ** 2, 0, 1)
    return np.abs(pts - (p + t * v))


def max_substitution_deviation(g: int, cumulative: bool = False) -> float:
    """
    Largest distance of a refined polyline from the segment it replaces, relative to
    that segment's length.

    With ``cumulative=False``: generation ``g+1`` against generation ``g`` (one step,
    ``sqrt(3)/14``). With ``cumulative=True``: generation ``g`` against generation 0
    (bounded by ``sqrt(21) / (14 (sqrt(7) - 1))``).

    >>> round(max_substitution_deviation(2), 9)
    0.123717915
    """
    if cumulative:
        coarse, fine = _lattice_vertices(0), _lattice_vertices(_check_generation(g))
    else:
        coarse = _lattice_vertices(_check_generation(g))
        fine = _lattice_vertices(_check_generation(g + 1))
    per = len(fine) // len(coarse)
    nxt = np.roll(coarse, -1)
    worst = 0.0
    pieces = np.append(fine, fine[0])
    for k, (p, q) in enumerate(zip(coarse, nxt)):
        piece = pieces[k * per:(k + 1) * per + 1]
        worst = max(worst, _point_segment_distance(piece, p, q).max() / abs(q - p))
    return float(worst)


# --------------------------------------------------------------------------------------
# Radii, curves and circles


@lru_cache(maxsize=None)
def tile_inradius(g: int = 6) -> float:
    """Radius of a centered disk contained in G0 (certified lower bound, diam(G0) = 1)"""
    dist = _local_ring(g).distance(shapely.Point(0.0, 0.0))
    return tile_scale() * (dist - lattice_margin(g))


def annulus_curve(A: _TileGeometry, eta: float, g: int = DFLT_GENERATION) -> Tuple[np.ndarray, float]:
    """
    A closed rectifiable curve inside ``A`` separating ``core(A, eta)`` from the boundary:
    the inner parallel curve at depth ``eta/2 * diam(A)``. Returns (vertices, length).
    """
    if not 0 < eta < 1:
        raise ValueError(f'eta should be in (0, 1), was {eta}')
    inner = A.shape(g).buffer(-eta / 2 * A.diam)
    if inner.is_empty:
        raise ValueError(f'eta={eta} leaves nothing of the tile')
    if inner.geom_type == 'MultiPolygon':
        warnings.warn('Inner parallel curve has several components: keeping the largest')
        inner = max(inner.geoms, key=lambda geom: geom.area)
    xy = np.asarray(inner.exterior.coords)[:-1]
    return xy[:, 0] + 1j * xy[:, 1], float(inner.exterior.length)


def separating_circle_radius(A: _TileGeometry) -> float:
    """
    Radius of the circle about ``A``'s center separating ``lam^4 (.) A`` from the
    boundary of ``lam^5 (.) A``: midpoint of the circumradius of the former and the
    inradius of the latter.
    """
    outer_of_small = ABS_LAMBDA ** 4 * A.circumradius
    inner_of_big = ABS_LAMBDA ** 5 * A.inradius
    assert outer_of_small < inner_of_big, 'lam^4 blow-up is not inside the lam^5 in-disk'
    return 0.5 * (outer_of_small + inner_of_big)


# --------------------------------------------------------------------------------------
# Tiling constants


@dataclass(frozen=True)
class TilingConstants:
    d0: float
    eta0: float
    inradius: float
    a2: int
    a3: int
    generation: int
    version: int = CONSTANTS_VERSION

    def to_dict(self) -> dict:
        return {
            'd0': self.d0,
            'eta0': self.eta0,
            'inradius': self.inradius,
            'a2': self.a2,
            'a3': self.a3,
            'generation': self.generation,
            'version': self.version,
        }

    @classmethod
    def from_dict(cls, d: dict) -> 'TilingConstants':
        return cls(
            d0=float(d['d0']),
            eta0=float(d['eta0']),
            inradius=float(d['inradius']),
            a2=int(d['a2']),
            a3=int(d['a3']),
            generation=int(d['generation']),
            version=int(d.get('version', CONSTANTS_VERSION)),
        )


def _min_nonadjacent_gap(g: int) -> float:
    """Lattice-unit gap between G0 and the nonadjacent tiles of rings 2 and 3 (polygons)"""
    base = _local_polygon(g)
    verts = _lattice_vertices(g)
    gaps = []
    for a, b in hex_disk(3):
        if max(abs(a), abs(b), abs(a + b)) < 2:
            continue
        shifted = verts + complex(a + b * OMEGA)
        other = shapely.Polygon(np.column_stack([shifted.real, shifted.imag]))
        gaps.append(base.distance(other))
    return min(gaps)


def _min_segment_depth(g: int, seg_len: float, grid_step: float = 0.005,
                       mid_step: float = 0.02, n_angles: int = 20, n_along: int = 41):
    """
    Lower bound (lattice units) of ``min over segments of max depth along the segment``
    for segments of length ``seg_len`` with midpoint in the central hexagon, using
    6-fold symmetry to restrict angles to [0, pi/3).
    """
    # boundary network of the tiles around the origin
    verts = _lattice_vertices(g)
    per_edge = 4
    ring_pts, _ = _sample_polyline(verts, per_edge)
    network = np.concatenate(
        [ring_pts + complex(a + b * OMEGA) for a, b in hex_disk(3)]
    )
    tree = cKDTree(np.column_stack([network.real, network.imag]))
    half = 1 / math.sqrt(3) + seg_len / 2 + 2 * grid_step
    axis = np.arange(-half, half + grid_step, grid_step)
    gx, gy = np.meshgrid(axis, axis, indexing='ij')
    depth, _ = tree.query(np.column_stack([gx.ravel(), gy.ravel()]))
    depth = depth.reshape(gx.shape)

    # midpoints in the central hexagon
    mids_axis = np.arange(-1 / math.sqrt(3), 1 / math.sqrt(3) + mid_step, mid_step)
    mx, my = np.meshgrid(mids_axis, mids_axis, indexing='ij')
    mids = (mx + 1j * my).ravel()
    ma, mb = eis_round(mids)
    mids = mids[(ma == 0) & (mb == 0)]

    angles = np.arange(n_angles) * (math.pi / 3) / n_angles
    along = np.linspace(-0.5, 0.5, n_along) * seg_len
    worst = np.inf
    for angle in angles:
        pts = mids[:, None] + along[None, :] * np.exp(1j * angle)
        coords = np.vstack([
            ((pts.real - axis[0]) / grid_step).ravel(),
            ((pts.imag - axis[0]) / grid_step).ravel(),
        ])
        vals = ndimage.map_coordinates(depth, coords, order=1).reshape(pts.shape)
        worst = min(worst, vals.max(axis=1).min())
    error = grid_step * math.sqrt(2) / 2 + segment_lattice_length(g) / per_edge / 2
    return worst - error - lattice_margin(g)


def compute_constants(g: int = DFLT_CONSTANTS_GENERATION) -> TilingConstants:
    """
    Certified tiling constants from the generation-g polygons:

    - ``d0``: gap between nonadjacent level-0 tiles, minus the deviation margins
    - ``eta0``: largest eta (to 1e-3) such that every sampled segment of length ``d0``
      meets ``core(G, 2 eta)`` of some tile
    - ``inradius``: radius of a centered disk in G0
    - ``a2``, ``a3``: minimal integers with ``|lam|^(3-a2) <= eta0/2`` and
      ``|lam|^(3-a3) < d0``
    """
    g = _check_generation(g)
    if g < 4:
        raise ValueError(f'constants need generation >= 4, was {g}')
    S = tile_scale()
    d0 = S * (_min_nonadjacent_gap(g) - 2 * lattice_margin(g))
    if d0 <= 0:
        raise ConstantsError(f'd0 is not certified positive at generation {g}: raise g')
    logger.info('d0 = %s (generation %d)', d0, g)
    depth = S * _min_segment_depth(g, d0 / S)
    eta0 = math.floor(depth / 2 / 1e-3) * 1e-3
    if eta0 <= 0:
        raise ConstantsError(f'eta0 is not certified positive at generation {g}: raise g')
    inradius = tile_inradius(max(g, 6))
    if not inradius > 0.5 / ABS_LAMBDA:
        raise ConstantsError('the centered disk of G0 does not contain lam^-1 G0')
    log_lam = math.log(ABS_LAMBDA)
    a2 = math.ceil(3 - math.log(eta0 / 2) / log_lam)
    a3 = math.floor(3 - math.log(d0) / log_lam) + 1
    return TilingConstants(d0=d0, eta0=round(eta0, 3), inradius=inradius, a2=a2, a3=a3,
                           generation=g)


def write_constants(constants: TilingConstants, filepath: str = DFLT_CONSTANTS_FILEPATH) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(filepath)), exist_ok=True)
    with open(filepath, 'w') as fp:
        json.dump(constants.to_dict(), fp, indent=2, sort_keys=True)
        fp.write('\n')
    return filepath


@lru_cache(maxsize=None)
def _computed_constants(g: int) -> TilingConstants:
    return compute_constants(g)


def load_constants(filepath: str = DFLT_CONSTANTS_FILEPATH) -> TilingConstants:
    """
    The golden tiling constants, read from ``filepath`` (written by
    ``flab tiling --write-constants``). Recomputed, with a warning, if the file is
    missing or has another version.
    """
    if os.path.isfile(filepath):
        with open(filepath) as fp:
            constants = TilingConstants.from_dict(json.load(fp))
        if constants.version == CONSTANTS_VERSION:
            return constants
        warnings.warn(f'{filepath} has constants version {constants.version}, recomputing')
    else:
        warnings.warn(f'No golden tiling constants at {filepath}: computing them')
    return _computed_constants(DFLT_CONSTANTS_GENERATION)
