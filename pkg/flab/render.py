"""Drawing tilings, rasters, frontiers, Whitney tiles and trees as deterministic SVG"""

import matplotlib

matplotlib.use('Agg')

import matplotlib.pyplot as plt
import numpy as np
from matplotlib import cm
from matplotlib.collections import LineCollection, PolyCollection

from flab.geometry_sets import frontier
from flab.gosper_tiling import DFLT_GENERATION, boundary_polygon, tiles_in_window

plt.rcParams['svg.hashsalt'] = 'flab'
SVG_METADATA = {'Date': None}


def save_svg(fig, filepath: str) -> str:
    """Save ``fig`` as SVG (no date, fixed ids: same figure, same bytes) and close it"""
    fig.savefig(filepath, format='svg', metadata=SVG_METADATA)
    plt.close(fig)
    return filepath


def _ax(ax=None, figsize=(8, 8)):
    if ax is None:
        _, ax = plt.subplots(figsize=figsize)
    ax.set_aspect('equal')
    return ax


def _xy(z) -> np.ndarray:
    z = np.asarray(z)
    return np.column_stack([z.real, z.imag])


def plot_tiles(tiles, g: int = DFLT_GENERATION, ax=None, facecolors=None, edgecolor='k',
               linewidth=None, alpha=1.0):
    """
    One polygon per tile. Line widths shrink with the tile level unless given.

    :param tiles: tiles or tile shaped regions
    :param facecolors: a color, a list of colors (one per tile) or None for no fill
    """
    ax = _ax(ax)
    tiles = list(tiles)
    if not tiles:
        return ax
    polys = [_xy(T.polygon(g)) for T in tiles]
    if linewidth is None:
        linewidth = [max(0.1, 1.0 - 0.15 * getattr(T, 'level', 0)) for T in tiles]
    coll = PolyCollection(
        polys,
        facecolors='none' if facecolors is None else facecolors,
        edgecolors=edgecolor,
        linewidths=linewidth,
        alpha=alpha,
    )
    ax.add_collection(coll)
    ax.autoscale_view()
    return ax


def render_tiling(level: int, window=(-1.0, 1.0, -1.0, 1.0), g: int = DFLT_GENERATION, ax=None,
                  max_tiles: int = 5_000_000):
    """The level-``level`` tiles meeting ``window``, drawn with generation-g polygons"""
    ax = _ax(ax)
    tiles = tiles_in_window(level, window, max_tiles)
    plot_tiles(tiles, g, ax=ax)
    xmin, xmax, ymin, ymax = window
    ax.set_xlim(xmin, xmax)
    ax.set_ylim(ymin, ymax)
    ax.set_title(f'level {level}, generation {g}: {len(tiles)} tiles')
    return ax


def plot_path(path, ax=None, color='tab:blue', linewidth=0.3):
    ax = _ax(ax)
    pts = np.asarray(getattr(path, 'points', path), dtype=float)
    ax.plot(pts[:, 0], pts[:, 1], color=color, linewidth=linewidth)
    return ax


def plot_raster(K, ax=None, cmap='Greys', alpha=1.0):
    """The bitmap of a raster set, in world coordinates"""
    ax = _ax(ax)
    x0, y0 = K.origin
    h, w = K.shape
    ax.imshow(
        K.bitmap,
        origin='lower',
        extent=(x0, x0 + w * K.cell, y0, y0 + h * K.cell),
        cmap=cmap,
        alpha=alpha,
        interpolation='nearest',
    )
    return ax


def plot_frontier(K, res=None, ax=None):
    """The raster in grey with its frontier cells in red"""
    ax = plot_raster(K, ax=ax, cmap='Greys', alpha=0.5)
    res = frontier(K) if res is None else res
    cells = res.frontier_cells.cells
    ax.scatter(cells[:, 0], cells[:, 1], s=0.5, c='tab:red', marker='s', linewidths=0)
    return ax


def plot_whitney(W, g: int = 2, ax=None, cmap='viridis'):
    """Whitney tiles filled with one color per level, over the raster of ``K``"""
    ax = _ax(ax)
    tiles = sorted(W.tiles)
    n_min, n_max = W.level_range
    colormap = cm.get_cmap(cmap) if hasattr(cm, 'get_cmap') else matplotlib.colormaps[cmap]
    span = max(1, n_max - n_min)
    colors = [colormap((T.level - n_min) / span) for T in tiles]
    plot_tiles(tiles, g, ax=ax, facecolors=colors, edgecolor='k', alpha=0.8)
    cells = W.source.cells
    ax.scatter(cells[:, 0], cells[:, 1], s=0.3, c='k', marker='s', linewidths=0)
    return ax


def plot_tree(T, g: int = 2, ax=None):
    """Tree nodes as tiles, edges as segments between centers"""
    ax = _ax(ax)
    plot_tiles(T.nodes, g, ax=ax, facecolors='tab:orange', alpha=0.6)
    segments = [
        [(G.center.real, G.center.imag), (D.center.real, D.center.imag)]
        for G, kids in sorted(T.edges.items()) for D in kids
    ]
    if segments:
        ax.add_collection(LineCollection(segments, colors='k', linewidths=0.5))
    ax.autoscale_view()
    return ax


def ax_func_to_plot(list_func_per_ax, n_per_row=3, title=None, title_font_size=10, width=15,
                    height_row=5, saving_path=None):
    """
    Draw one grid of plots from the individual plots

    :param list_func_per_ax: a list of functions, each taking an ax object as an input and plotting something on it
    :param n_per_row: number of plots per row
    :param title: global title of the plot
    :param saving_path: where to save the SVG, or None to return the figure open
    :return: the figure
    """
    n_rows = int(np.ceil(len(list_func_per_ax) / n_per_row))
    fig, axes = plt.subplots(
        nrows=n_rows, ncols=n_per_row, figsize=(width, height_row * n_rows), squeeze=False
    )
    if title is not None:
        fig.suptitle(title, fontsize=title_font_size)
    for ax, func in zip(axes.flatten(), list_func_per_ax):
        func(ax=ax)
    # Delete the remaining empty plots if any
    for i in range(len(list_func_per_ax), n_rows * n_per_row):
        fig.delaxes(axes.flatten()[i])
    fig.tight_layout()
    if saving_path:
        save_svg(fig, saving_path)
    return fig


def plot_generations(generations=(0, 1, 2, 3), saving_path=None):
    """The boundary polygons of successive generations, side by side"""

    def panel(g):
        def draw(ax):
            xy = boundary_polygon(g).xy
            ax.fill(xy[:, 0], xy[:, 1], facecolor='none', edgecolor='k', linewidth=0.5)
            ax.set_aspect('equal')
            ax.set_title(f'generation {g}: {len(xy)} vertices')

        return draw

    return ax_func_to_plot([panel(g) for g in generations], n_per_row=min(4, len(generations)),
                           saving_path=saving_path)
