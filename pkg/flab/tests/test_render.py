import matplotlib.pyplot as plt

from flab.geometry_sets import raster_circle
from flab.gosper_tiling import TileAddress, children
from flab.render import (
    ax_func_to_plot,
    plot_frontier,
    plot_generations,
    plot_raster,
    plot_tiles,
    plot_tree,
    render_tiling,
    save_svg,
)
from flab.whitney_tree import regular_tree


def test_plot_tiles_draws_one_polygon_per_tile():
    ax = plot_tiles(children(TileAddress(0, 0, 0)), g=2)
    assert len(ax.collections) == 1
    assert len(ax.collections[0].get_paths()) == 7
    plt.close(ax.figure)


def test_render_tiling_sets_the_window():
    ax = render_tiling(1, (-0.5, 0.5, -0.5, 0.5), g=1)
    assert ax.get_xlim() == (-0.5, 0.5)
    assert 'level 1' in ax.get_title()
    plt.close(ax.figure)


def test_same_figure_same_svg_bytes(tmp_path):
    K = raster_circle(1.0, 0.05)
    paths = []
    for name in ('a.svg', 'b.svg'):
        ax = plot_frontier(K)
        paths.append(save_svg(ax.figure, str(tmp_path / name)))
    with open(paths[0], 'rb') as fa, open(paths[1], 'rb') as fb:
        assert fa.read() == fb.read()


def test_grid_of_plots(tmp_path):
    K = raster_circle(1.0, 0.05)
    T = regular_tree(3, 2)
    fig = ax_func_to_plot(
        [lambda ax: plot_raster(K, ax=ax), lambda ax: plot_tree(T, ax=ax)],
        n_per_row=3,
        title='raster and tree',
    )
    assert len(fig.axes) == 2
    plt.close(fig)
    filepath = str(tmp_path / 'generations.svg')
    plot_generations((0, 1), saving_path=filepath)
    with open(filepath) as fp:
        assert fp.read().lstrip().startswith('<?xml')
