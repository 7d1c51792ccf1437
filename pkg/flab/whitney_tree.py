"""Whitney tiles of the complement of a raster, Whitney chains, walls and the pruned tree of walls

A tile ``G`` is a Whitney tile of ``K`` when ``lam (.) G`` misses ``K`` but
``lam (.) parent(G)`` meets it. Intersections are decided against ``K`` dilated by one
raster cell, so every decision errs toward "meets".
"""

import logging
import math
import warnings
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import shapely
from scipy import ndimage, stats
from scipy.spatial import cKDTree

from flab.geometry_sets import (
    CROSS,
    RasterSet,
    complement_components,
    tile_mask,
)
from flab.gosper_tiling import (
    ABS_LAMBDA,
    DIGITS,
    LAMBDA,
    ORIGIN_TILE,
    Region,
    TileAddress,
    blow_up,
    children,
    eis_to_complex,
    lattice_near,
    load_constants,
    neighbors,
    parent,
    region_contains_region,
    separating_circle_radius,
    tile_scale,
    touches,
)
from flab.util import CapacityError, InsufficientDepthError, ResolutionError, write_json

logger = logging.getLogger(__name__)

DFLT_H = 1
DFLT_DEPTH = 2
DFLT_POLYGON_GENERATION = 3
DFLT_MAX_LEVELS = 12
DFLT_MAX_TILES = 5_000_000
CHAIN_BLOW_UP = ABS_LAMBDA ** 5
SIBLING_BLOW_UP = ABS_LAMBDA ** 6


# --------------------------------------------------------------------------------------
# Intersection of tile blow-ups with K


def _parent_coords(coords: np.ndarray) -> np.ndarray:
    """Vectorized exact division by lambda of (N, 2) lattice coordinates"""
    a, b = coords[:, 0], coords[:, 1]
    out = np.zeros_like(coords)
    done = np.zeros(len(coords), dtype=bool)
    for da, db in DIGITS:
        ca, cb = a - da, b - db
        ta, tb = 3 * ca + cb, 2 * cb - ca
        ok = ~done & (ta % 7 == 0) & (tb % 7 == 0)
        out[ok, 0], out[ok, 1] = ta[ok] // 7, tb[ok] // 7
        done |= ok
    assert done.all(), 'DIGITS is not a residue system mod lambda'
    return out


def _centers(level: int, coords: np.ndarray) -> np.ndarray:
    return tile_scale() * LAMBDA ** (-level) * eis_to_complex(coords[:, 0], coords[:, 1])


class _KIndex:
    """Nearest-cell queries on ``K`` for ``lam (.) G meets K`` decisions"""

    def __init__(self, K: RasterSet, g: int = DFLT_POLYGON_GENERATION):
        if K.is_empty:
            raise ValueError('K should be nonempty')
        self.K = K
        self.g = g
        self.points = K.cells
        self.tree = cKDTree(self.points)
        # one cell of dilation, plus the half diagonal of the cell itself
        self.dilation = 1.5 * math.sqrt(2) * K.cell

    def hits(self, level: int, coords: np.ndarray) -> np.ndarray:
        coords = np.asarray(coords, dtype=np.int64).reshape(-1, 2)
        if not len(coords):
            return np.zeros(0, dtype=bool)
        proto = blow_up(TileAddress(level, 0, 0), ABS_LAMBDA)
        margin = self.dilation + proto.margin(self.g)
        centers = _centers(level, coords)
        d, _ = self.tree.query(np.column_stack([centers.real, centers.imag]))
        hit = d <= proto.inradius + margin
        unsure = np.flatnonzero(~hit & (d <= proto.circumradius + margin))
        for idx in unsure:
            region = Region(TileAddress(level, int(coords[idx, 0]), int(coords[idx, 1])), ABS_LAMBDA)
            near = self.tree.query_ball_point(
                [centers[idx].real, centers[idx].imag], proto.circumradius + margin
            )
            hit[idx] = bool(np.any(region.depth(self.points[near], self.g) >= -margin))
        return hit

    def hit(self, G: TileAddress) -> bool:
        return bool(self.hits(G.level, np.array([G.coord]))[0])

    def is_whitney(self, level: int, coords: np.ndarray) -> np.ndarray:
        coords = np.asarray(coords, dtype=np.int64).reshape(-1, 2)
        hit = self.hits(level, coords)
        out = np.zeros(len(coords), dtype=bool)
        missing = np.flatnonzero(~hit)
        if len(missing):
            parents, inverse = np.unique(_parent_coords(coords[missing]), axis=0, return_inverse=True)
            out[missing] = self.hits(level - 1, parents)[np.asarray(inverse).ravel()]
        return out


# --------------------------------------------------------------------------------------
# Whitney decomposition


@dataclass(frozen=True, eq=False)
class WhitneyDecomposition:
    tiles: frozenset
    level_range: Tuple[int, int]
    source: RasterSet
    roi: Optional[object] = None

    def __contains__(self, G) -> bool:
        return G in self.tiles

    def __len__(self):
        return len(self.tiles)

    def __iter__(self):
        return iter(sorted(self.tiles))

    def at_level(self, n: int) -> List[TileAddress]:
        return sorted(G for G in self.tiles if G.level == n)

    def to_dict(self) -> dict:
        return {
            'level_range': list(self.level_range),
            'tiles': [[G.level, G.a, G.b] for G in sorted(self.tiles)],
        }


def whitney_tiles(K: RasterSet, n_min: int, n_max: int, roi=None,
                  g: int = DFLT_POLYGON_GENERATION, max_levels: int = DFLT_MAX_LEVELS,
                  max_tiles: int = DFLT_MAX_TILES, check_connected: bool = True
                  ) -> WhitneyDecomposition:
    """
    The Whitney tiles of ``K`` with level in ``[n_min, n_max]``, restricted to tiles
    whose ``lam^5`` blow-up meets the region ``roi`` (any tile shaped region) if given.
    """
    if K.is_empty:
        raise ValueError('K should be nonempty')
    if n_max < n_min:
        raise ValueError(f'n_max={n_max} is below n_min={n_min}')
    if n_max - n_min > max_levels:
        raise ValueError(f'{n_max - n_min} levels exceed max_levels={max_levels}')
    if ABS_LAMBDA ** (-n_max) < 4 * K.cell:
        raise ResolutionError(
            f'tiles of level {n_max} (diameter {ABS_LAMBDA ** (-n_max):.3g}) are too small '
            f'for cells of {K.cell} (need diameter >= 4 cells)'
        )
    if check_connected and not K.is_connected:
        raise ValueError(f'K should be connected, has {K.components} components')
    index = _KIndex(K, g)
    tiles = set()
    for n in range(n_min, n_max + 1):
        proto = TileAddress(n, 0, 0)
        radius = (ABS_LAMBDA + 1) * ABS_LAMBDA * proto.circumradius + index.dilation
        pts = index.points
        if roi is not None:
            reach = roi.circumradius + CHAIN_BLOW_UP * proto.circumradius
            d = np.abs(pts[:, 0] + 1j * pts[:, 1] - roi.center)
            pts = pts[d <= reach + radius]
        if not len(pts):
            continue
        cand = lattice_near(pts[:, 0] + 1j * pts[:, 1], n, radius)
        if roi is not None:
            reach = roi.circumradius + CHAIN_BLOW_UP * proto.circumradius
            cand = cand[np.abs(_centers(n, cand) - roi.center) <= reach]
        if len(cand) > max_tiles:
            raise CapacityError(f'{len(cand)} candidate tiles at level {n} exceed max_tiles={max_tiles}')
        keep = cand[index.is_whitney(n, cand)]
        logger.debug('level %d: %d of %d candidates are Whitney tiles', n, len(keep), len(cand))
        tiles.update(TileAddress(n, int(a), int(b)) for a, b in keep)
    return WhitneyDecomposition(frozenset(tiles), (n_min, n_max), K, roi)


def level_gap_violations(W: WhitneyDecomposition) -> List[Tuple[TileAddress, TileAddress]]:
    """
    Pairs of adjacent Whitney tiles whose levels differ by 2 or more (or where one
    contains the other), as ``(coarse, fine)``
    """
    out = set()
    n_min = W.level_range[0]
    for G in W.tiles:
        for N in neighbors(G):
            A = N
            for k in range(1, G.level - n_min + 1):
                A = parent(A)
                if k >= 2 and A in W.tiles:
                    out.add((A, G))
    return sorted(out)


def distance_ratios(W: WhitneyDecomposition, g: int = DFLT_POLYGON_GENERATION) -> np.ndarray:
    """``diam(G) / dist(G, K)`` for every tile, distances to the cells of ``K``"""
    index = _KIndex(W.source, g)
    out = []
    for G in sorted(W.tiles):
        d, _ = index.tree.query([G.center.real, G.center.imag])
        near = index.tree.query_ball_point([G.center.real, G.center.imag], d + 1e-12)
        pts = index.points[near]
        dist = float(shapely.distance(G.shape(g), shapely.points(pts[:, 0], pts[:, 1])).min())
        out.append(G.diam / dist if dist > 0 else math.inf)
    return np.array(out)


# --------------------------------------------------------------------------------------
# Chains and walls


def _forward_neighbors(X: TileAddress, tiles) -> Iterable[TileAddress]:
    """Whitney tiles adjacent to ``X`` of the same level or one level finer"""
    for N in neighbors(X):
        if N in tiles:
            yield N
        for C in children(N):
            if C in tiles and touches(C, X):
                yield C


def chain_component(W: WhitneyDecomposition, G: TileAddress, max_level: Optional[int] = None,
                    g: int = DFLT_POLYGON_GENERATION) -> set:
    """
    ``W_K^G``: the Whitney tiles reachable from ``G`` by chains of adjacent Whitney
    tiles of nondecreasing level, all inside ``lam^5 (.) G`` (breadth first).
    """
    if G not in W.tiles:
        raise ValueError(f'{G} is not a Whitney tile')
    max_level = W.level_range[1] if max_level is None else max_level
    outer = blow_up(G, CHAIN_BLOW_UP)
    seen, rejected = {G}, set()
    queue = deque([G])
    while queue:
        X = queue.popleft()
        for Y in _forward_neighbors(X, W.tiles):
            if Y in seen or Y in rejected or Y.level > max_level:
                continue
            if region_contains_region(outer, Y, g):
                seen.add(Y)
                queue.append(Y)
            else:
                rejected.add(Y)
    return seen


def wall(W: WhitneyDecomposition, G: TileAddress, n: int, component: Optional[set] = None) -> set:
    """``Wall(G, n)``: the level-n tiles of the chain component of ``G``"""
    if n < G.level:
        raise ValueError(f'n={n} should be at least the level of {G}')
    component = chain_component(W, G, max_level=n) if component is None else component
    return {T for T in component if T.level == n}


def _same_level_components(tiles: set) -> List[set]:
    comps, seen = [], set()
    for T in sorted(tiles):
        if T in seen:
            continue
        comp, queue = {T}, deque([T])
        seen.add(T)
        while queue:
            X = queue.popleft()
            for N in neighbors(X):
                if N in tiles and N not in seen:
                    seen.add(N)
                    comp.add(N)
                    queue.append(N)
        comps.append(comp)
    return comps


def wall_circle_violations(W: WhitneyDecomposition, G: TileAddress, n: int) -> List[set]:
    """
    Wall components meeting the disk bounded by the separating circle about ``G``
    that do not meet the circle itself (conservative tile-disk tests)
    """
    rho = separating_circle_radius(G)
    out = []
    for comp in _same_level_components(wall(W, G, n)):
        dists = [abs(T.center - G.center) for T in comp]
        R = next(iter(comp)).circumradius
        meets_disk = any(d - R <= rho for d in dists)
        meets_circle = any(abs(d - rho) <= R for d in dists)
        if meets_disk and not meets_circle:
            out.append(comp)
    return out


def _tiles_raster(tiles: Iterable, eps: float, g: int, dilate: float = 0.0) -> RasterSet:
    pieces = [tile_mask(T, eps, dilate=dilate, g=g, max_cells=None).indices for T in tiles]
    if not pieces:
        return RasterSet(eps, np.empty((0, 2), dtype=np.int64), None)
    return RasterSet(eps, np.vstack(pieces), None)


def _labels_at(labels: np.ndarray, offset, eps: float, points: np.ndarray) -> np.ndarray:
    """Labels of the cells containing ``points`` (-1 outside the label array)"""
    ij = np.floor(points / eps).astype(np.int64) - np.asarray(offset)
    h, w = labels.shape
    inside = (ij[:, 0] >= 0) & (ij[:, 0] < w) & (ij[:, 1] >= 0) & (ij[:, 1] < h)
    out = np.full(len(points), -1, dtype=np.int64)
    out[inside] = labels[ij[inside, 1], ij[inside, 0]]
    return out


def wall_separates(W: WhitneyDecomposition, G: TileAddress, n: int, cells_per_tile: int = 4,
                   g: int = DFLT_POLYGON_GENERATION) -> bool:
    """
    Whether ``Wall(G, n)`` together with the boundary of ``lam^5 (.) G`` separates
    ``G`` from ``K``: a flood fill from ``G`` inside ``lam^5 (.) G`` avoiding the wall
    never reaches a cell of ``K``.
    """
    if n <= G.level:
        return True
    eps = ABS_LAMBDA ** (-n) / cells_per_tile
    region = tile_mask(blow_up(G, CHAIN_BLOW_UP), eps, g=g, max_cells=None)
    blocked = _tiles_raster(wall(W, G, n), eps, g, dilate=eps / 2)
    free = region.difference(blocked)
    if free.is_empty:
        return True
    labels, _ = ndimage.label(free.bitmap, structure=CROSS)
    start = _labels_at(labels, free.offset, eps, tile_mask(G, eps, g=g, max_cells=None).cells)
    start = set(start[start > 0].tolist())
    reached = _labels_at(labels, free.offset, eps, W.source.cells)
    return not bool(start & set(reached[reached > 0].tolist()))


def check_surround_lemma(W: WhitneyDecomposition, level: int, cells_per_tile: int = 8,
                         g: int = DFLT_POLYGON_GENERATION) -> List[int]:
    """
    Holes of the union of the level-n Whitney tiles that contain a smaller Whitney
    tile but no cell of ``K`` (should be empty). Returns their labels.
    """
    tiles = W.at_level(level)
    if not tiles:
        return []
    eps = ABS_LAMBDA ** (-level) / cells_per_tile
    union = _tiles_raster(tiles, eps, g)
    labels, exterior = complement_components(union)
    smaller = [T.center for T in W.tiles if T.level > level]
    if not smaller:
        return []
    small_pts = np.column_stack([np.real(smaller), np.imag(smaller)])
    small = set(_labels_at(labels, union.offset, eps, small_pts).tolist())
    with_k = set(_labels_at(labels, union.offset, eps, W.source.cells).tolist())
    holes = small - {-1, 0, exterior}
    violations = sorted(holes - with_k)
    if violations:
        logger.info('level %d: %d holes without K', level, len(violations))
    return violations


# --------------------------------------------------------------------------------------
# Tree of walls


@dataclass(frozen=True, eq=False)
class WhitneyTree:
    """
    Generation ``k`` holds tiles of level ``root.level + k h``; ``edges`` maps each
    expanded node to its chosen children, ``candidates`` to the size of its candidate
    set and ``offspring`` to the number of wall tiles meeting its separating disk.
    """

    root: TileAddress
    h: int
    generations: List[List[TileAddress]]
    edges: Dict[TileAddress, List[TileAddress]] = field(default_factory=dict)
    candidates: Dict[TileAddress, int] = field(default_factory=dict)
    offspring: Dict[TileAddress, int] = field(default_factory=dict)

    @property
    def depth(self) -> int:
        return len(self.generations) - 1

    @property
    def nodes(self) -> List[TileAddress]:
        return [G for gen in self.generations for G in gen]

    @property
    def branching_stats(self) -> List[dict]:
        return [
            {
                'generation': k,
                'level': self.root.level + k * self.h,
                'nodes': len(gen),
                'children': sum(len(self.edges.get(G, ())) for G in gen),
                'candidates': sum(self.candidates.get(G, 0) for G in gen),
            }
            for k, gen in enumerate(self.generations)
        ]

    def to_dict(self) -> dict:
        return {
            'root': self.root.to_dict(),
            'h': self.h,
            'generations': [
                {
                    'level': stat['level'],
                    'nodes': [[G.a, G.b] for G in gen],
                    'branching': stat['children'] / stat['nodes'] if stat['nodes'] else 0.0,
                }
                for stat, gen in zip(self.branching_stats, self.generations)
            ],
        }

    def write_json(self, filepath: str) -> str:
        return write_json(self.to_dict(), filepath)


def _scanline_key(D: TileAddress):
    c = D.center
    return (round(-c.imag, 9), round(c.real, 9), D.a, D.b)


def _blow_ups_disjoint(A: TileAddress, B: TileAddress, theta: float, g: int) -> bool:
    RA, RB = blow_up(A, theta), blow_up(B, theta)
    d = abs(A.center - B.center)
    if d > RA.circumradius + RB.circumradius + RA.margin(g) + RB.margin(g):
        return True
    if d < RA.inradius + RB.inradius:
        return False
    return bool(RA.shape(g).distance(RB.shape(g)) > RA.margin(g) + RB.margin(g))


def _greedy_disjoint(cands: Sequence[TileAddress], g: int) -> List[TileAddress]:
    """Maximal subfamily with pairwise disjoint ``lam^6`` blow-ups, scanning top to bottom"""
    chosen = []
    for D in sorted(cands, key=_scanline_key):
        if all(_blow_ups_disjoint(D, E, SIBLING_BLOW_UP, g) for E in chosen):
            chosen.append(D)
    return chosen


def offspring_statistic(W: WhitneyDecomposition, G: TileAddress, h: int,
                        component: Optional[set] = None) -> set:
    """
    ``U(G, h)``: tiles of ``W_K^G`` of level ``||G|| + h`` meeting the disk bounded by
    the circle separating ``lam^4 (.) G`` from the boundary of ``lam^5 (.) G``
    """
    rho = separating_circle_radius(G)
    level = G.level + h
    component = chain_component(W, G, max_level=level) if component is None else component
    return {
        D for D in component
        if D.level == level and abs(D.center - G.center) - D.circumradius <= rho
    }


def _check_root(K: RasterSet, root: TileAddress, g: int):
    """Warn when no coarser Whitney tile lies outside ``lam^5 (.) root``"""
    if root.level < 1:
        return
    level = root.level - 1
    if ABS_LAMBDA ** (-level) < 4 * K.cell:
        return
    index = _KIndex(K, g)
    outer = blow_up(root, CHAIN_BLOW_UP)
    cand = lattice_near(root.center, level, ABS_LAMBDA * outer.circumradius)
    cand = cand[np.abs(_centers(level, cand) - root.center) > outer.circumradius]
    if not index.is_whitney(level, cand).any():
        warnings.warn(f'no Whitney tile of level {level} outside the lam^5 blow-up of {root}')


def build_tree(K: RasterSet, root: TileAddress, h: int = DFLT_H, depth: int = DFLT_DEPTH,
               W: Optional[WhitneyDecomposition] = None, g: int = DFLT_POLYGON_GENERATION,
               check_root: bool = True) -> WhitneyTree:
    """
    The tree ``T(K, G*, h)``: the children of a node ``G`` are a maximal family, in
    scanline order, of tiles ``D`` of level ``||G|| + h`` in ``W_K^G`` with
    ``lam^5 (.) D`` inside ``lam^5 (.) G`` and pairwise disjoint ``lam^6`` blow-ups.
    """
    if h < 1:
        raise ValueError(f'h should be a positive integer, was {h}')
    if depth < 1:
        raise ValueError(f'depth should be a positive integer, was {depth}')
    outer_root = blow_up(root, CHAIN_BLOW_UP)
    if np.all(outer_root.contains(K.cells, g)):
        raise ResolutionError(f'the lam^5 blow-up of {root} contains all of K')
    if W is None:
        W = whitney_tiles(K, root.level, root.level + h * depth, roi=outer_root, g=g)
    if root not in W.tiles:
        raise ResolutionError(f'{root} is not a Whitney tile of K')
    if check_root:
        _check_root(K, root, g)
    generations = [[root]]
    edges, candidates, offspring = {}, {}, {}
    for k in range(depth):
        nxt = []
        for G in generations[-1]:
            level = G.level + h
            comp = chain_component(W, G, max_level=level, g=g)
            outer = blow_up(G, CHAIN_BLOW_UP)
            cands = [
                D for D in comp
                if D.level == level and region_contains_region(outer, blow_up(D, CHAIN_BLOW_UP), g)
            ]
            chosen = _greedy_disjoint(cands, g)
            edges[G] = chosen
            candidates[G] = len(cands)
            offspring[G] = len(offspring_statistic(W, G, h, comp))
            nxt.extend(chosen)
        logger.info('generation %d: %d nodes', k + 1, len(nxt))
        if not nxt:
            break
        generations.append(nxt)
    return WhitneyTree(root, h, generations, edges, candidates, offspring)


def pick_root(K: RasterSet, level: int, near: complex = 0j, g: int = DFLT_POLYGON_GENERATION,
              max_rounds: int = 20) -> TileAddress:
    """The level-``level`` Whitney tile of ``K`` closest to ``near`` (ties by coordinates)"""
    index = _KIndex(K, g)
    radius = ABS_LAMBDA ** (-level)
    for _ in range(max_rounds):
        cand = lattice_near(near, level, radius)
        found = cand[index.is_whitney(level, cand)]
        if len(found):
            d = np.abs(_centers(level, found) - near)
            best = min(zip(np.round(d, 12), found[:, 0], found[:, 1]))
            return TileAddress(level, int(best[1]), int(best[2]))
        radius *= 2
    raise ResolutionError(f'no Whitney tile of level {level} within {radius} of {near}')


def regular_tree(branching: int, depth: int, h: int = 1, root: TileAddress = ORIGIN_TILE) -> WhitneyTree:
    """A tree of tiles where every node has the first ``branching`` of its level +h descendants"""
    if not 1 <= branching <= 7 ** h:
        raise ValueError(f'branching should be in [1, {7 ** h}], was {branching}')
    generations, edges = [[root]], {}
    for _ in range(depth):
        nxt = []
        for G in generations[-1]:
            desc = [G]
            for _ in range(h):
                desc = [C for D in desc for C in children(D)]
            edges[G] = desc[:branching]
            nxt.extend(edges[G])
        generations.append(nxt)
    candidates = {G: len(kids) for G, kids in edges.items()}
    return WhitneyTree(root, h, generations, edges, candidates, {})


# --------------------------------------------------------------------------------------
# Tree statistics


@dataclass(frozen=True)
class GrowthEstimate:
    estimate: float
    branching: Tuple[float, ...]
    ci: Tuple[float, float]
    stderr: float
    h: int

    def to_dict(self) -> dict:
        return {
            'estimate': self.estimate,
            'branching': list(self.branching),
            'ci': list(self.ci),
            'stderr': self.stderr,
            'h': self.h,
        }


def growth_dimension(T: WhitneyTree, confidence: float = 0.95) -> GrowthEstimate:
    """
    ``log(geometric mean branching) / (h log |lam|)``, the dimension of the boundary
    of the tree in the metric ``|lam|^(-h n)``, with a jackknife interval over
    generations.

    >>> round(growth_dimension(regular_tree(7, 2)).estimate, 12)
    2.0
    >>> round(growth_dimension(regular_tree(2, 3, h=2)).estimate, 4)
    0.3562
    """
    sizes = [len(gen) for gen in T.generations]
    if len(sizes) < 3:
        raise InsufficientDepthError(f'need 3 complete generations, the tree has {len(sizes)}')
    ratios = [b / a for a, b in zip(sizes[:-1], sizes[1:])]
    scale = T.h * math.log(ABS_LAMBDA)

    def statistic(rs):
        return float(np.mean(np.log(rs))) / scale

    estimate = statistic(ratios)
    n = len(ratios)
    loo = np.array([statistic(ratios[:i] + ratios[i + 1:]) for i in range(n)])
    stderr = math.sqrt((n - 1) / n * float(((loo - loo.mean()) ** 2).sum()))
    half = stats.t.ppf(0.5 + confidence / 2, n - 1) * stderr
    return GrowthEstimate(estimate, tuple(ratios), (estimate - half, estimate + half), stderr, T.h)


def local_dimension_bound(T: WhitneyTree) -> float:
    """Lower bound proxy for the dimension of the frontier inside ``lam^5 (.) root``"""
    return growth_dimension(T).estimate


def _descendants(T: WhitneyTree, v: TileAddress) -> set:
    out, queue = set(), deque([v])
    while queue:
        for C in T.edges.get(queue.popleft(), ()):
            if C not in out:
                out.add(C)
                queue.append(C)
    return out


def truncate(T: WhitneyTree, v: TileAddress) -> WhitneyTree:
    """``trunc_v(T)``: the tree without the nodes below ``v``"""
    if v not in set(T.nodes):
        raise ValueError(f'{v} is not a node of the tree')
    below = _descendants(T, v)
    generations = [[G for G in gen if G not in below] for gen in T.generations]
    while len(generations) > 1 and not generations[-1]:
        generations.pop()
    edges = {G: ([] if G == v else kids) for G, kids in T.edges.items() if G not in below}

    def keep(d):
        return {G: x for G, x in d.items() if G not in below}

    return WhitneyTree(T.root, T.h, generations, edges, keep(T.candidates), keep(T.offspring))


def rays(T: WhitneyTree) -> List[List[TileAddress]]:
    """Root to leaf paths, leaves in generation order"""
    out = []

    def walk(path):
        kids = T.edges.get(path[-1], [])
        if not kids:
            out.append(path)
        for C in kids:
            walk(path + [C])

    walk([T.root])
    return out


def boundary_distance(T: WhitneyTree, xi: Sequence[TileAddress], xi2: Sequence[TileAddress],
                      C: float = 1.0, theta: Optional[float] = None) -> float:
    """
    ``C theta^-n`` for rays sharing ``n`` edges (``theta`` defaults to ``|lam|^h``)

    >>> T = regular_tree(2, 2)
    >>> r = rays(T)
    >>> boundary_distance(T, r[0], r[1], theta=2.0), boundary_distance(T, r[0], r[0])
    (0.5, 0.0)
    """
    if list(xi) == list(xi2):
        return 0.0
    theta = ABS_LAMBDA ** T.h if theta is None else theta
    shared = 0
    for a, b in zip(xi, xi2):
        if a != b:
            break
        shared += 1
    return C * theta ** (-(shared - 1))


def limit_points(T: WhitneyTree) -> Dict[TileAddress, complex]:
    """Centers of the deepest nodes, approximating the points the rays end at"""
    return {G: G.center for G in T.generations[-1]}


def sibling_separation(T: WhitneyTree, d0: Optional[float] = None) -> List[dict]:
    """
    For every pair of siblings of generation ``n + 1``: the smallest distance between
    limit points below each of them, and the bound ``d0 |lam|^(-(n+1) h - ||root||)``.
    """
    d0 = load_constants().d0 if d0 is None else d0
    deepest = set(T.generations[-1])
    out = []
    for n, gen in enumerate(T.generations[:-1]):
        bound = d0 * ABS_LAMBDA ** (-(n + 1) * T.h - T.root.level)
        for G in gen:
            kids = T.edges.get(G, [])
            below = [
                [D.center for D in ({C} | _descendants(T, C)) & deepest] or [C.center] for C in kids
            ]
            for i in range(len(kids)):
                for j in range(i + 1, len(kids)):
                    a, b = np.asarray(below[i]), np.asarray(below[j])
                    dist = float(np.abs(a[:, None] - b[None, :]).min())
                    out.append({'generation': n, 'node': str(G), 'distance': dist, 'bound': bound,
                                'ok': dist >= bound})
    return out


def sibling_overlaps(T: WhitneyTree, g: int = DFLT_POLYGON_GENERATION) -> List[Tuple[TileAddress, TileAddress]]:
    """Sibling pairs whose ``lam^6`` blow-ups are not certified disjoint"""
    out = []
    for kids in T.edges.values():
        for i, A in enumerate(kids):
            out.extend((A, B) for B in kids[i + 1:] if not _blow_ups_disjoint(A, B, SIBLING_BLOW_UP, g))
    return out


def nesting_violations(T: WhitneyTree, g: int = DFLT_POLYGON_GENERATION) -> List[Tuple[TileAddress, TileAddress]]:
    """Edges whose child ``lam^5`` blow-up is not inside the parent's"""
    return [
        (G, D)
        for G, kids in T.edges.items()
        for D in kids
        if not region_contains_region(blow_up(G, CHAIN_BLOW_UP), blow_up(D, CHAIN_BLOW_UP), g)
    ]


def pruning_ratios(T: WhitneyTree) -> List[float]:
    """``|candidates| / |children|`` per expanded node with children"""
    return [T.candidates[G] / len(kids) for G, kids in T.edges.items() if kids]

