"""Gosper tilings, Whitney trees, beta numbers and frontiers of planar paths"""

__version__ = '0.1.0'

from flab.util import (
    FlabError,
    CapacityError,
    ResolutionError,
    DegenerateFitError,
    InsufficientDepthError,
    ConstantsError,
)
from flab.gosper_tiling import (
    TileAddress,
    ORIGIN_TILE,
    children,
    parent,
    neighbors,
    blow_up,
    locate,
    core_contains,
    boundary_polygon,
    load_constants,
)
from flab.geometry_sets import RasterSet, rasterize_path, frontier, eta_surrounds, hits_core
from flab.stochastic_paths import PathSample, sample_bm, sample_killed, sample_bridge, sample_srw
from flab.whitney_tree import whitney_tiles, build_tree, growth_dimension
from flab.tst_beta import beta, tst_sum, curve_length_floor
from flab.dimension_stats import (
    box_dimension,
    BranchingSpec,
    extinction_prob,
    percolate_tree,
    surround_prob_mc,
)
