"""Graph-based denoising of 3D point clouds."""

from ._kernels import backend
from .cloud import CloudFormatError, PointCloud, read_cloud, write_cloud
from .denoise import (
    DenoiseConfig,
    SolveDiagnostics,
    iterative_denoise,
    soft_threshold,
    tikhonov_denoise,
    tv_denoise,
)
from .graph import (
    GraphBuildParams,
    SpatialIndex,
    WeightedGraph,
    build_epsilon_graph,
    build_knn_graph,
    build_spatial_index,
    build_spatiotemporal_graph,
)
from .ops import graph_divergence, graph_gradient, laplacian_apply, weighted_degrees
from .outliers import FilterReport, degree_filter, tau_from_percentile

__version__ = "0.1.0"
