"""Degrees, Laplacian, gradient and divergence on a :class:`WeightedGraph`.

Vertex signals are arrays of shape (n,) or (n, d); edge signals are arrays
of shape (m,) or (m, d) over the graph's directed arcs. The gradient of x on
arc ``i->j`` is ``sqrt(w_ij) * (x_j - x_i)``, so summing over both arcs of
every edge gives ``|grad x|^2 = 2 x^T L x`` with ``L = D - W``.
"""

import numpy as np

from . import _kernels
from .graph import WeightedGraph

__all__ = [
    "weighted_degrees",
    "laplacian_apply",
    "graph_gradient",
    "graph_divergence",
    "tikhonov_energy",
    "tv_energy",
]


def _as_block(x, length, what):
    x = np.asarray(x, dtype=np.float64)
    vector = x.ndim == 1
    block = x[:, None] if vector else x
    if block.ndim != 2 or block.shape[0] != length:
        raise ValueError(f"{what} has shape {x.shape}, expected leading dimension {length}")
    return np.ascontiguousarray(block), vector


def weighted_degrees(graph: WeightedGraph) -> np.ndarray:
    """Sum of incident edge weights per vertex (0 for isolated vertices)."""
    return graph.degrees.copy()


def laplacian_apply(graph: WeightedGraph, x) -> np.ndarray:
    """Return ``(D - W) x`` column by column."""
    xb, vector = _as_block(x, graph.n_vertices, "signal")
    out = _kernels.shifted_laplacian_matvec(
        graph.indptr, graph.indices, graph.weights, graph.degrees, xb, 0.0, 1.0)
    return out[:, 0] if vector else out


def graph_gradient(graph: WeightedGraph, x) -> np.ndarray:
    """Edge signal ``sqrt(w_ij) (x_j - x_i)`` on every arc ``i->j``."""
    xb, vector = _as_block(x, graph.n_vertices, "signal")
    out = _kernels.arc_gradient(graph.indptr, graph.indices, graph.sqrt_weights, xb)
    return out[:, 0] if vector else out


def graph_divergence(graph: WeightedGraph, z) -> np.ndarray:
    """Negative adjoint of :func:`graph_gradient`.

    ``<grad x, z> = <x, -div z>`` for every vertex signal x and edge signal z.
    """
    zb, vector = _as_block(z, graph.n_arcs, "edge signal")
    out = _kernels.arc_divergence(graph.indptr, graph.indices, graph.sqrt_weights, graph.rev, zb)
    return out[:, 0] if vector else out


def tikhonov_energy(graph: WeightedGraph, x) -> float:
    """Squared gradient norm ``|grad x|_2^2`` summed over arcs and dimensions."""
    g = graph_gradient(graph, x)
    return float(np.sum(g * g))


def tv_energy(graph: WeightedGraph, x, coupling="anisotropic") -> float:
    """Total variation ``|grad x|_1``.

    ``anisotropic`` sums absolute values over arcs and dimensions;
    ``isotropic`` sums the Euclidean norm of each arc's d-vector.
    """
    g = graph_gradient(graph, x)
    if g.ndim == 1 or coupling == "anisotropic":
        return float(np.sum(np.abs(g)))
    if coupling == "isotropic":
        return float(np.sum(np.sqrt(np.sum(g * g, axis=1))))
    raise ValueError(f"unknown coupling {coupling!r}")
