"""Rasterized planar sets: supercover rasterization, frontiers, holes, eta-surround and core tests

Cells live on a global grid anchored at the world origin: cell ``(i, j)`` of size
``eps`` covers ``[i eps, (i+1) eps] x [j eps, (j+1) eps]``. Sets are 8-connected and
complements 4-connected.
"""

import json
import logging
import os
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage, sparse
from scipy.sparse import csgraph

from flab.gosper_tiling import as_complex, core_contains, current_max_generation
from flab.util import CapacityError, ResolutionError

logger = logging.getLogger(__name__)

DFLT_MAX_CELLS = int(os.environ.get('FRONTIERLAB_MAX_CELLS', 50_000_000))
CROSS = ndimage.generate_binary_structure(2, 1)  # 4-connectivity
SEGMENT_CHUNK = 200_000


def _keys(indices: np.ndarray) -> np.ndarray:
    """Order preserving int64 keys of (i, j) cell indices"""
    indices = np.asarray(indices, dtype=np.int64)
    return (indices[:, 0] << 32) + (indices[:, 1] + (1 << 31))


def _check_capacity(n_cells: int, max_cells: Optional[int], what: str = 'grid'):
    if max_cells is not None and n_cells > max_cells:
        raise CapacityError(f'{what} of {n_cells} cells exceeds max_cells={max_cells}')


@dataclass(frozen=True, eq=False)
class RasterSet:
    """
    A compact set as the union of closed grid cells of size ``cell``.

    ``indices`` holds the sorted unique global ``(i, j)`` of the occupied cells; the
    dense ``bitmap`` over the bounding box (rows are ``j``) is built on demand.
    """

    cell: float
    indices: np.ndarray
    max_cells: Optional[int] = DFLT_MAX_CELLS

    def __post_init__(self):
        if not self.cell > 0:
            raise ValueError(f'cell size should be positive, was {self.cell}')
        indices = np.asarray(self.indices, dtype=np.int64).reshape(-1, 2)
        indices = np.unique(indices, axis=0)
        indices.setflags(write=False)
        object.__setattr__(self, 'indices', indices)

    def __len__(self):
        return len(self.indices)

    @property
    def is_empty(self) -> bool:
        return len(self.indices) == 0

    @property
    def bbox(self) -> Tuple[int, int, int, int]:
        """``(i_min, i_max, j_min, j_max)`` of the occupied cells"""
        if self.is_empty:
            raise ValueError('an empty set has no bounding box')
        lo, hi = self.indices.min(axis=0), self.indices.max(axis=0)
        return int(lo[0]), int(hi[0]), int(lo[1]), int(hi[1])

    @property
    def offset(self) -> Tuple[int, int]:
        i0, _, j0, _ = self.bbox
        return i0, j0

    @property
    def origin(self) -> Tuple[float, float]:
        """World coordinates of the lower left corner of the bitmap"""
        i0, j0 = self.offset
        return i0 * self.cell, j0 * self.cell

    @property
    def shape(self) -> Tuple[int, int]:
        i0, i1, j0, j1 = self.bbox
        return j1 - j0 + 1, i1 - i0 + 1

    @cached_property
    def bitmap(self) -> np.ndarray:
        h, w = self.shape
        _check_capacity(h * w, self.max_cells, 'bitmap')
        bm = np.zeros((h, w), dtype=bool)
        i0, j0 = self.offset
        bm[self.indices[:, 1] - j0, self.indices[:, 0] - i0] = True
        bm.setflags(write=False)
        return bm

    @property
    def cells(self) -> np.ndarray:
        """World coordinates of the occupied cell centers, (N, 2)"""
        return (self.indices + 0.5) * self.cell

    @cached_property
    def components(self) -> int:
        """Number of 8-connected components (on the sparse cell graph, no bitmap needed)"""
        if self.is_empty:
            return 0
        own = _keys(self.indices)
        rows, cols = [], []
        for di, dj in ((1, -1), (1, 0), (1, 1), (0, 1)):
            shifted = self.indices + (di, dj)
            hit = self.contains_cells(shifted)
            rows.append(np.flatnonzero(hit))
            cols.append(np.searchsorted(own, _keys(shifted[hit])))
        rows, cols = np.concatenate(rows), np.concatenate(cols)
        graph = sparse.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(own), len(own)))
        n, _ = csgraph.connected_components(graph, directed=False)
        return int(n)

    @property
    def is_connected(self) -> bool:
        return self.components == 1

    def contains_cells(self, indices) -> np.ndarray:
        """Which of the given ``(i, j)`` cells are occupied"""
        keys = _keys(np.asarray(indices, dtype=np.int64).reshape(-1, 2))
        own = _keys(self.indices)
        pos = np.clip(np.searchsorted(own, keys), 0, max(len(own) - 1, 0))
        return (own[pos] == keys) if len(own) else np.zeros(len(keys), dtype=bool)

    def union(self, other: 'RasterSet') -> 'RasterSet':
        if other.cell != self.cell:
            raise ValueError('union of rasters with different cell sizes')
        return RasterSet(self.cell, np.vstack([self.indices, other.indices]), self.max_cells)

    def difference(self, other: 'RasterSet') -> 'RasterSet':
        if other.cell != self.cell:
            raise ValueError('difference of rasters with different cell sizes')
        return RasterSet(self.cell, self.indices[~other.contains_cells(self.indices)], self.max_cells)

    def issubset(self, other: 'RasterSet') -> bool:
        return bool(other.contains_cells(self.indices).all())

    def restrict(self, bbox: Sequence[int]) -> 'RasterSet':
        """The cells with ``i_min <= i <= i_max`` and ``j_min <= j <= j_max``"""
        i0, i1, j0, j1 = bbox
        i, j = self.indices[:, 0], self.indices[:, 1]
        keep = (i >= i0) & (i <= i1) & (j >= j0) & (j <= j1)
        return RasterSet(self.cell, self.indices[keep], self.max_cells)

    def upsampled(self, factor: int = 2) -> 'RasterSet':
        """The same set on a grid ``factor`` times finer"""
        sub = np.array([(a, b) for a in range(factor) for b in range(factor)])
        fine = (self.indices[:, None, :] * factor + sub[None, :, :]).reshape(-1, 2)
        return RasterSet(self.cell / factor, fine, self.max_cells)


def raster_from_mask(mask, cell: float, offset: Tuple[int, int] = (0, 0), max_cells=DFLT_MAX_CELLS) -> RasterSet:
    """A raster from a boolean array indexed ``[j - j0, i - i0]``"""
    j, i = np.nonzero(np.asarray(mask, dtype=bool))
    return RasterSet(cell, np.column_stack([i + offset[0], j + offset[1]]), max_cells)


def raster_from_points(points, cell: float, max_cells=DFLT_MAX_CELLS) -> RasterSet:
    """
    The cells containing the given points

    >>> len(raster_from_points([[0.05, 0.05], [0.06, 0.01], [0.25, 0.05]], 0.1))
    2
    """
    z = np.atleast_1d(as_complex(points))
    indices = np.column_stack([np.floor(z.real / cell), np.floor(z.imag / cell)])
    return RasterSet(cell, indices.astype(np.int64), max_cells)


# --------------------------------------------------------------------------------------
# Rasterization


def _supercover(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Cells (grid units) touched by the closed segments p -> q, as (K, 2) indices"""
    lo = np.ceil(np.minimum(p, q)).astype(np.int64) - 1
    hi = np.floor(np.maximum(p, q)).astype(np.int64)
    widths = hi - lo + 1
    out = []
    shapes, inverse = np.unique(widths, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).ravel()
    for group, (wx, wy) in enumerate(shapes):
        rows = np.flatnonzero(inverse == group)
        ox, oy = np.meshgrid(np.arange(wx), np.arange(wy), indexing='ij')
        offs = np.column_stack([ox.ravel(), oy.ravel()])
        cand = lo[rows][:, None, :] + offs[None, :, :]  # (m, k, 2)
        pp, dd = p[rows][:, None, :], (q[rows] - p[rows])[:, None, :]
        crosses = []
        for cx, cy in ((0, 0), (1, 0), (0, 1), (1, 1)):
            rx = cand[..., 0] + cx - pp[..., 0]
            ry = cand[..., 1] + cy - pp[..., 1]
            crosses.append(dd[..., 0] * ry - dd[..., 1] * rx)
        crosses = np.stack(crosses)
        touched = (crosses.min(axis=0) <= 0) & (crosses.max(axis=0) >= 0)
        # the bounding box overlap must also hold for the (closed) cell itself
        x_ok = (cand[..., 0] <= np.maximum(pp[..., 0], pp[..., 0] + dd[..., 0])) & (
            cand[..., 0] + 1 >= np.minimum(pp[..., 0], pp[..., 0] + dd[..., 0])
        )
        y_ok = (cand[..., 1] <= np.maximum(pp[..., 1], pp[..., 1] + dd[..., 1])) & (
            cand[..., 1] + 1 >= np.minimum(pp[..., 1], pp[..., 1] + dd[..., 1])
        )
        out.append(cand[touched & x_ok & y_ok])
    return np.vstack(out) if out else np.empty((0, 2), dtype=np.int64)


def rasterize_segments(p, q, eps: float) -> np.ndarray:
    """Unique cell indices touched by the segments ``p[k] -> q[k]`` ((N, 2) arrays)"""
    p = np.asarray(p, dtype=float).reshape(-1, 2) / eps
    q = np.asarray(q, dtype=float).reshape(-1, 2) / eps
    pieces = [
        np.unique(_supercover(p[bt:bt + SEGMENT_CHUNK], q[bt:bt + SEGMENT_CHUNK]), axis=0)
        for bt in range(0, len(p), SEGMENT_CHUNK)
    ]
    if not pieces:
        return np.empty((0, 2), dtype=np.int64)
    return np.unique(np.vstack(pieces), axis=0)


def rasterize_polyline(points, eps: float, closed: bool = False, max_cells=DFLT_MAX_CELLS) -> RasterSet:
    """
    All cells touched by the polyline through ``points`` (complex or (N, 2)).

    >>> len(rasterize_polyline([[0.5, 0.5], [3.5, 0.5]], 1.0))
    4
    """
    if not eps > 0:
        raise ValueError(f'eps should be positive, was {eps}')
    z = np.atleast_1d(as_complex(points))
    if not len(z):
        raise ValueError('a polyline needs at least one point')
    _check_capacity(
        int((np.ptp(z.real) / eps + 3) * (np.ptp(z.imag) / eps + 3)), max_cells, 'grid'
    )
    xy = np.column_stack([z.real, z.imag])
    if closed:
        xy = np.vstack([xy, xy[:1]])
    if len(xy) == 1:
        return raster_from_points(xy, eps, max_cells)
    return RasterSet(eps, rasterize_segments(xy[:-1], xy[1:], eps), max_cells)


def rasterize_path(path, eps: float, max_cells=DFLT_MAX_CELLS) -> RasterSet:
    """
    Conservative supercover of a sampled path: every cell the polyline touches.
    ``path`` is a ``PathSample`` or an (N, 2) array.
    """
    points = getattr(path, 'points', path)
    return rasterize_polyline(np.asarray(points, dtype=float), eps, max_cells=max_cells)


# --------------------------------------------------------------------------------------
# Frontier and boundary


@dataclass(frozen=True, eq=False)
class FrontierResult:
    frontier_cells: RasterSet
    unbounded_component_label: int
    hole_count: int


def _exterior(mask: np.ndarray):
    """Labels of the 4-connected complement of ``mask`` padded by one empty cell"""
    padded = np.pad(mask, 1)
    labels, n_labels = ndimage.label(~padded, structure=CROSS)
    return padded, labels, n_labels, int(labels[0, 0])


def frontier(K: RasterSet) -> FrontierResult:
    """
    Cells of ``K`` 4-adjacent to the unbounded component of the complement.

    >>> disk = raster_from_mask(np.ones((5, 5), dtype=bool), 1.0)
    >>> res = frontier(disk)
    >>> len(res.frontier_cells), res.hole_count
    (16, 0)
    """
    if K.is_empty:
        raise ValueError('frontier of an empty set')
    padded, labels, n_labels, exterior = _exterior(K.bitmap)
    near_exterior = ndimage.binary_dilation(labels == exterior, structure=CROSS)
    touch = (near_exterior & padded)[1:-1, 1:-1]
    return FrontierResult(
        frontier_cells=raster_from_mask(touch, K.cell, K.offset, K.max_cells),
        unbounded_component_label=exterior,
        hole_count=n_labels - 1,
    )


def complement_components(K: RasterSet) -> Tuple[np.ndarray, int]:
    """
    4-connected components of the complement of ``K`` in its bounding box, as a
    label array shaped like ``K.bitmap`` (0 on ``K``) and the label of the unbounded
    component. Labels other than 0 and the unbounded one are holes.
    """
    _, labels, _, exterior = _exterior(K.bitmap)
    return labels[1:-1, 1:-1], exterior


def boundary_cells(K: RasterSet) -> RasterSet:
    """Cells of ``K`` 4-adjacent to any complement cell (holes included)"""
    if K.is_empty:
        raise ValueError('boundary of an empty set')
    padded = np.pad(K.bitmap, 1)
    touch = (ndimage.binary_dilation(~padded, structure=CROSS) & padded)[1:-1, 1:-1]
    return raster_from_mask(touch, K.cell, K.offset, K.max_cells)


def frontier_lattice(S) -> np.ndarray:
    """
    Points of the finite lattice set ``S`` that are 4-adjacent to the unbounded
    component of ``Z^2 - S``, as an (M, 2) array (sorted).
    """
    pts = np.unique(np.asarray(S, dtype=np.int64).reshape(-1, 2), axis=0)
    if not len(pts):
        raise ValueError('S should be nonempty')
    lo = pts.min(axis=0)
    h, w = (pts.max(axis=0) - lo + 1)[::-1]
    mask = np.zeros((h, w), dtype=bool)
    mask[pts[:, 1] - lo[1], pts[:, 0] - lo[0]] = True
    padded, labels, _, exterior = _exterior(mask)
    touch = (ndimage.binary_dilation(labels == exterior, structure=CROSS) & padded)[1:-1, 1:-1]
    j, i = np.nonzero(touch)
    return np.unique(np.column_stack([i + lo[0], j + lo[1]]), axis=0)


def outer_boundary_lattice(S) -> int:
    """
    Number of points of ``S`` adjacent to the unbounded component of its complement

    >>> outer_boundary_lattice([(0, 0)])
    1
    >>> outer_boundary_lattice([(i, j) for i in range(3) for j in range(3)])
    8
    """
    return len(frontier_lattice(S))


# --------------------------------------------------------------------------------------
# Tiles on the grid


def _generation_for(A, tol: float, max_generation: Optional[int] = None) -> int:
    """Smallest polygon generation whose deviation margin around ``A`` is below ``tol``"""
    max_generation = current_max_generation() if max_generation is None else max_generation
    g = 0
    while A.margin(g) >= tol and g < max_generation:
        g += 1
    return g


def _tile_window(A, eps: float, pad: int = 2):
    r, c = A.circumradius, A.center
    i0 = int(np.floor((c.real - r) / eps)) - pad
    i1 = int(np.floor((c.real + r) / eps)) + pad
    j0 = int(np.floor((c.imag - r) / eps)) - pad
    j1 = int(np.floor((c.imag + r) / eps)) + pad
    return i0, i1, j0, j1


def _window_centers(window, eps):
    i0, i1, j0, j1 = window
    ii, jj = np.meshgrid(np.arange(i0, i1 + 1), np.arange(j0, j1 + 1), indexing='xy')
    return ii, jj, (ii + 0.5) * eps + 1j * (jj + 0.5) * eps


def tile_mask(A, eps: float, dilate: float = 0.0, g: Optional[int] = None,
              max_cells=DFLT_MAX_CELLS) -> RasterSet:
    """Grid cells (size ``eps``) whose centers are in the tile or region ``A`` dilated by ``dilate``"""
    g = _generation_for(A, eps / 2) if g is None else g
    window = _tile_window(A, eps, pad=2 + int(np.ceil(dilate / eps)))
    i0, i1, j0, j1 = window
    _check_capacity((i1 - i0 + 1) * (j1 - j0 + 1), max_cells, 'tile window')
    ii, jj, z = _window_centers(window, eps)
    inside = A.depth(z, g) >= -dilate
    return RasterSet(eps, np.column_stack([ii[inside], jj[inside]]), max_cells)


def _surround_verdict(K: RasterSet, A, eta: float):
    """(surrounds, ambiguous) on K's grid"""
    eps = K.cell
    g = _generation_for(A, eps / 2)
    window = _tile_window(A, eps)
    i0, i1, j0, j1 = window
    _check_capacity((i1 - i0 + 1) * (j1 - j0 + 1), K.max_cells, 'tile window')
    ii, jj, z = _window_centers(window, eps)
    depth = A.depth(z, g)
    in_tile = depth > 0
    local = K.restrict(window)
    k_mask = np.zeros(ii.shape, dtype=bool)
    if len(local):
        k_mask[local.indices[:, 1] - j0, local.indices[:, 0] - i0] = True
    _, labels, _, exterior = _exterior(k_mask & in_tile)
    reachable = (labels == exterior)[1:-1, 1:-1]
    threshold = eta * A.diam
    tol = eps + A.margin(g)
    sure_core = depth > threshold + tol
    band = (depth > threshold - tol) & ~sure_core
    if (reachable & sure_core).any():
        return False, False
    if (reachable & band).any():
        return not (reachable & (depth > threshold)).any(), True
    return True, False


def eta_surrounds(K: RasterSet, A, eta: float, refine: bool = True) -> bool:
    """
    Whether ``K`` topologically separates ``core(A, eta)`` from the complement of the
    tile ``A``: no core cell is reachable from outside ``A`` through the 4-connected
    complement of ``K`` inside ``A``. Verdicts decided within the raster/polygon
    tolerance of the core boundary are recomputed once on a grid twice as fine.
    """
    if not 0 < eta < 1:
        raise ValueError(f'eta should be in (0, 1), was {eta}')
    if K.cell > eta * A.diam / 8:
        raise ResolutionError(
            f'cell {K.cell} is too coarse for eta={eta} on a tile of diameter {A.diam} '
            f'(needs <= {eta * A.diam / 8})'
        )
    verdict, ambiguous = _surround_verdict(K, A, eta)
    if ambiguous and refine:
        logger.debug('surround verdict near the core boundary: refining')
        verdict, _ = _surround_verdict(K.upsampled(2), A, eta)
    return verdict


def hits_core(K: RasterSet, A, eta: float) -> bool:
    """Whether some occupied cell center of ``K`` lies in ``core(A, eta)``"""
    if not 0 < eta < 1:
        raise ValueError(f'eta should be in (0, 1), was {eta}')
    local = K.restrict(_tile_window(A, K.cell))
    if local.is_empty:
        return False
    g = _generation_for(A, K.cell / 2)
    return bool(np.any(core_contains(A, eta, local.cells, g)))


# --------------------------------------------------------------------------------------
# Serialization


def write_pbm(K: RasterSet, filepath: str) -> str:
    """
    Binary PBM (P4) of the bitmap, top row first, with a JSON sidecar
    ``filepath + '.json'`` holding ``{origin, eps, offset, shape}``.
    """
    bm = np.flipud(K.bitmap)
    h, w = bm.shape
    with open(filepath, 'wb') as fp:
        fp.write(f'P4\n{w} {h}\n'.encode('ascii'))
        fp.write(np.packbits(bm, axis=1).tobytes())
    sidecar = {
        'origin': list(K.origin),
        'eps': K.cell,
        'offset': list(K.offset),
        'shape': [h, w],
    }
    with open(filepath + '.json', 'w') as fp:
        json.dump(sidecar, fp, indent=2, sort_keys=True)
    return filepath


def read_pbm(filepath: str) -> RasterSet:
    with open(filepath, 'rb') as fp:
        data = fp.read()
    tokens, pos = [], 0
    while len(tokens) < 3:
        end = data.index(b'\n', pos)
        line = data[pos:end].split(b'#')[0]
        tokens.extend(line.split())
        pos = end + 1
    if tokens[0] != b'P4':
        raise ValueError(f'{filepath} is not a binary PBM file')
    w, h = int(tokens[1]), int(tokens[2])
    bits = np.frombuffer(data, dtype=np.uint8, offset=pos).reshape(h, -1)
    bm = np.unpackbits(bits, axis=1)[:, :w].astype(bool)
    with open(filepath + '.json') as fp:
        sidecar = json.load(fp)
    return raster_from_mask(np.flipud(bm), sidecar['eps'], tuple(sidecar['offset']))


def frontier_stats(K: RasterSet, res: Optional[FrontierResult] = None) -> dict:
    """Cell counts of a raster, its frontier and its boundary"""
    res = frontier(K) if res is None else res
    return {
        'cells': len(K),
        'frontier_cells': len(res.frontier_cells),
        'boundary_cells': len(boundary_cells(K)),
        'hole_count': res.hole_count,
        'eps': K.cell,
    }


def warn_if_disconnected(K: RasterSet):
    if not K.is_connected:
        warnings.warn(f'raster has {K.components} 8-connected components')


def raster_circle(radius: float, eps: float, center: complex = 0j, n_vertices: Optional[int] = None,
                  max_cells=None) -> RasterSet:
    """
    Supercover raster of a circle, drawn as a closed polygon with ``eps`` spaced vertices

    >>> raster_circle(1.0, 0.05).is_connected
    True
    """
    n_vertices = n_vertices or max(16, int(np.ceil(2 * np.pi * radius / eps)))
    z = center + radius * np.exp(2j * np.pi * np.arange(n_vertices) / n_vertices)
    return rasterize_polyline(z, eps, closed=True, max_cells=max_cells)
