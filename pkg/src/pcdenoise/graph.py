"""Neighborhood graphs over point clouds.

Graphs are stored as a symmetric CSR adjacency with sorted columns. Each
undirected edge appears twice, once per direction ("arc"); the arc order is
the CSR order, and ``rev[a]`` gives the index of the opposite arc.

Edge weights use the thresholded Gaussian kernel
``w_ij = exp(-|p_i - p_j|^2 / (2 theta^2))`` on Euclidean distance.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from .cloud import PointCloud

__all__ = [
    "WeightedGraph",
    "GraphBuildParams",
    "SpatialIndex",
    "build_spatial_index",
    "build_knn_graph",
    "build_epsilon_graph",
    "build_spatiotemporal_graph",
    "build_graph",
    "gaussian_weights",
    "write_edgelist",
    "read_edgelist",
]

_TINY = np.finfo(np.float64).tiny


@dataclass(frozen=True, eq=False)
class WeightedGraph:
    """Sparse symmetric weighted graph without self-loops."""

    n_vertices: int
    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray

    @classmethod
    def from_pairs(cls, n, i, j, w) -> WeightedGraph:
        """Build from undirected pairs ``(i[e], j[e])`` with weights ``w[e]``.

        Pairs must be unique up to orientation and must not contain loops.
        """
        i = np.asarray(i, dtype=np.int64)
        j = np.asarray(j, dtype=np.int64)
        w = np.asarray(w, dtype=np.float64)
        if np.any(i == j):
            raise ValueError("self-loops are not allowed")
        rows = np.concatenate([i, j])
        cols = np.concatenate([j, i])
        vals = np.concatenate([w, w])
        order = np.lexsort((cols, rows))
        rows, cols, vals = rows[order], cols[order], vals[order]
        if rows.size and np.any((np.diff(rows) == 0) & (np.diff(cols) == 0)):
            raise ValueError("duplicate edges")
        idx_dtype = np.int32 if n < 2**31 - 1 else np.int64
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=n), out=indptr[1:])
        return cls(int(n), indptr, cols.astype(idx_dtype), vals)

    @classmethod
    def from_dense(cls, W) -> WeightedGraph:
        W = np.asarray(W, dtype=np.float64)
        if not np.array_equal(W, W.T):
            raise ValueError("adjacency must be symmetric")
        i, j = np.nonzero(np.triu(W, 1))
        return cls.from_pairs(W.shape[0], i, j, W[i, j])

    @property
    def n_arcs(self) -> int:
        return int(self.indices.shape[0])

    @property
    def n_edges(self) -> int:
        return self.n_arcs // 2

    @cached_property
    def sources(self) -> np.ndarray:
        """Source vertex of every arc."""
        return np.repeat(np.arange(self.n_vertices, dtype=self.indices.dtype), np.diff(self.indptr))

    @cached_property
    def rev(self) -> np.ndarray:
        """Index of the reverse arc ``j->i`` for every arc ``i->j``."""
        n = np.int64(self.n_vertices)
        src = self.sources.astype(np.int64)
        dst = self.indices.astype(np.int64)
        keys = src * n + dst  # sorted, since CSR columns are sorted
        return np.searchsorted(keys, dst * n + src).astype(self.indices.dtype)

    @cached_property
    def sqrt_weights(self) -> np.ndarray:
        return np.sqrt(self.weights)

    @cached_property
    def degrees(self) -> np.ndarray:
        """Weighted degree (sum of incident edge weights) per vertex."""
        return np.bincount(self.sources, weights=self.weights, minlength=self.n_vertices)

    def adjacency(self) -> sp.csr_matrix:
        """The weight matrix W as a scipy CSR matrix."""
        n = self.n_vertices
        return sp.csr_matrix((self.weights, self.indices, self.indptr), shape=(n, n))

    def laplacian(self) -> sp.csr_matrix:
        """Combinatorial Laplacian ``D - W``."""
        return (sp.diags(self.degrees) - self.adjacency()).tocsr()

    def edge_pairs(self):
        """Undirected edges as ``(i, j, w)`` arrays with ``i < j``."""
        src = self.sources
        keep = src < self.indices
        return src[keep], self.indices[keep], self.weights[keep]

    def neighbors(self, i):
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def subgraph(self, keep) -> WeightedGraph:
        """Induced subgraph on the vertex list ``keep`` (renumbered in order)."""
        keep = np.asarray(keep, dtype=np.int64)
        newid = np.full(self.n_vertices, -1, dtype=np.int64)
        newid[keep] = np.arange(keep.size)
        i, j, w = self.edge_pairs()
        ok = (newid[i] >= 0) & (newid[j] >= 0)
        return WeightedGraph.from_pairs(keep.size, newid[i[ok]], newid[j[ok]], w[ok])


@dataclass
class GraphBuildParams:
    """Graph construction parameters.

    ``theta`` is a length in scene units or the string ``"auto"``: the mean
    distance of each point to its k-th neighbour (k-NN / temporal graphs), or
    the mean edge length (epsilon graphs, falling back to ``epsilon / 3``
    when there are no edges).
    """

    k: int = 10
    epsilon: float = 0.01
    theta: float | str = "auto"
    k1: int | None = None
    k2: int | None = None

    def validate(self, temporal=False):
        if int(self.k) < 1:
            raise ValueError("k must be >= 1")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if self.theta != "auto" and not float(self.theta) > 0:
            raise ValueError("theta must be > 0 or 'auto'")
        if temporal:
            _check_temporal_counts(self.k1, self.k2)
        return self


def _check_temporal_counts(k1, k2):
    if k1 is None or k2 is None:
        raise ValueError("temporal graphs need both k1 and k2")
    if not (int(k2) >= 1 and int(k1) > 2 * int(k2)):
        raise ValueError(f"temporal graphs need k1 > 2*k2 >= 2, got k1={k1}, k2={k2}")


def gaussian_weights(points, i, j, theta):
    """Kernel weights for the pairs ``(i, j)``, clamped to stay positive."""
    diff = points[i] - points[j]
    d2 = np.einsum("ij,ij->i", diff, diff)
    w = np.exp(-d2 / (2.0 * theta * theta))
    return np.maximum(w, _TINY)


def _points_of(cloud):
    return cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=np.float64)


class SpatialIndex:
    """Exact Euclidean k-nearest and radius queries over a fixed point set.

    Neighbour lists are ordered by distance with ties broken by lower index.
    """

    def __init__(self, points):
        self.points = np.asarray(points, dtype=np.float64)
        if self.points.shape[0] == 0:
            raise ValueError("cannot index an empty point set")
        self.tree = cKDTree(self.points)

    def __len__(self):
        return self.points.shape[0]

    def query_knn(self, queries, k, exclude=None):
        """k nearest indexed points for each query row.

        Args:
            queries: (q, 3) query positions.
            k: neighbours per query.
            exclude: optional (q,) index per query that must not be returned
                (the query's own index when querying members).

        Returns:
            (dist, idx), both (q, k), sorted by distance then index.
        """
        queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
        n = len(self)
        avail = n - (0 if exclude is None else 1)
        if k > avail:
            raise ValueError(f"k={k} exceeds the {avail} available neighbours")
        q = queries.shape[0]
        out_d = np.empty((q, k))
        out_i = np.empty((q, k), dtype=np.int64)
        todo = np.arange(q)
        kk = min(k + 2, n)
        while todo.size:
            d, ix = self.tree.query(queries[todo], k=kk, workers=-1)
            d = d.reshape(todo.size, kk)
            ix = ix.reshape(todo.size, kk).astype(np.int64)
            if exclude is not None:
                self_hit = ix == exclude[todo, None]
                d = np.where(self_hit, np.inf, d)
            order = _rowwise_lexsort(d, ix)
            d = np.take_along_axis(d, order, axis=1)
            ix = np.take_along_axis(ix, order, axis=1)
            # safe when the candidate set is exhaustive or strictly beyond the k-th distance
            finite_last = np.where(np.isinf(d), -np.inf, d).max(axis=1)
            safe = (kk >= n) | (finite_last > d[:, k - 1])
            rows = todo[safe]
            out_d[rows] = d[safe, :k]
            out_i[rows] = ix[safe, :k]
            todo = todo[~safe]
            kk = min(2 * kk, n)
        return out_d, out_i

    def query_radius(self, query, r):
        """Indices within distance ``r`` of ``query`` (sorted ascending)."""
        return np.array(sorted(self.tree.query_ball_point(np.asarray(query, dtype=np.float64), r)),
                        dtype=np.int64)

    def pairs_within(self, r):
        """All index pairs ``i < j`` with ``|p_i - p_j| <= r``."""
        pairs = self.tree.query_pairs(r, output_type="ndarray")
        return pairs[:, 0].astype(np.int64), pairs[:, 1].astype(np.int64)


def _rowwise_lexsort(d, ix):
    # sort each row by distance, ties by index
    order = np.argsort(ix, axis=1, kind="stable")
    d2 = np.take_along_axis(d, order, axis=1)
    o2 = np.argsort(d2, axis=1, kind="stable")
    return np.take_along_axis(order, o2, axis=1)


def build_spatial_index(cloud) -> SpatialIndex:
    return SpatialIndex(_points_of(cloud))


def _unique_pairs(n, i, j):
    lo = np.minimum(i, j).astype(np.int64)
    hi = np.maximum(i, j).astype(np.int64)
    keys = np.unique(lo * np.int64(n) + hi)
    return keys // n, keys % n


def _resolve_theta(theta, fallback):
    if theta == "auto":
        theta = fallback()
        if not theta > 0:
            raise ValueError("automatic theta is zero (all neighbours coincide); pass theta explicitly")
        return float(theta)
    theta = float(theta)
    if not theta > 0:
        raise ValueError("theta must be positive")
    return theta


def build_knn_graph(cloud, k=10, theta="auto", index=None) -> WeightedGraph:
    """k-NN graph with OR-symmetrisation.

    An edge joins i and j when j is among the k nearest points of i or i is
    among the k nearest points of j.
    """
    points = _points_of(cloud)
    n = points.shape[0]
    k = int(k)
    if k < 1:
        raise ValueError("k must be >= 1")
    if k >= n:
        raise ValueError(f"k={k} must be smaller than the number of points ({n})")
    index = index or SpatialIndex(points)
    dist, nbr = index.query_knn(points, k, exclude=np.arange(n))
    theta = _resolve_theta(theta, lambda: dist[:, -1].mean())
    i, j = _unique_pairs(n, np.repeat(np.arange(n), k), nbr.ravel())
    return WeightedGraph.from_pairs(n, i, j, gaussian_weights(points, i, j, theta))


def build_epsilon_graph(cloud, epsilon=0.01, theta="auto", index=None) -> WeightedGraph:
    """Graph joining every pair of points at distance at most ``epsilon``."""
    points = _points_of(cloud)
    if not epsilon > 0:
        raise ValueError("epsilon must be > 0")
    n = points.shape[0]
    if n == 0:
        return WeightedGraph.from_pairs(0, [], [], [])
    index = index or SpatialIndex(points)
    i, j = index.pairs_within(epsilon)

    def mean_edge_length():
        if i.size == 0:
            return epsilon / 3.0
        return np.linalg.norm(points[i] - points[j], axis=1).mean()

    theta = _resolve_theta(theta, mean_edge_length)
    return WeightedGraph.from_pairs(n, i, j, gaussian_weights(points, i, j, theta))


def build_spatiotemporal_graph(cloud: PointCloud, k1, k2, theta="auto") -> WeightedGraph:
    """Graph over a point-cloud time series.

    Each point at frame t is linked to its ``k1`` nearest neighbours in frame
    t and its ``k2`` nearest neighbours in frames t-1 and t+1 (when present);
    the union of these links is symmetrised.
    """
    if cloud.frame_ids is None:
        raise ValueError("spatio-temporal graphs need frame_ids")
    k1, k2 = int(k1), int(k2)
    _check_temporal_counts(k1, k2)
    points = cloud.points
    n = points.shape[0]
    frames = cloud.frame_ids
    members = {int(t): np.flatnonzero(frames == t) for t in np.unique(frames)}
    for t, idx in members.items():
        if idx.size <= k1:
            raise ValueError(f"frame {t} has {idx.size} points, needs more than k1={k1}")
    trees = {t: SpatialIndex(points[idx]) for t, idx in members.items()}

    src, dst, kth = [], [], []
    for t, idx in members.items():
        d, loc = trees[t].query_knn(points[idx], k1, exclude=np.arange(idx.size))
        kth.append(d[:, -1])
        src.append(np.repeat(idx, k1))
        dst.append(idx[loc.ravel()])
        for s in (t - 1, t + 1):
            if s not in members:
                continue
            _, loc = trees[s].query_knn(points[idx], k2)
            src.append(np.repeat(idx, k2))
            dst.append(members[s][loc.ravel()])

    theta = _resolve_theta(theta, lambda: np.concatenate(kth).mean())
    i, j = _unique_pairs(n, np.concatenate(src), np.concatenate(dst))
    return WeightedGraph.from_pairs(n, i, j, gaussian_weights(points, i, j, theta))


def build_graph(cloud: PointCloud, params: GraphBuildParams) -> WeightedGraph:
    """k-NN graph, or the spatio-temporal graph when ``k1``/``k2`` are set."""
    if params.k1 is not None or params.k2 is not None:
        params.validate(temporal=True)
        return build_spatiotemporal_graph(cloud, params.k1, params.k2, params.theta)
    params.validate()
    return build_knn_graph(cloud, params.k, params.theta)


def write_edgelist(graph: WeightedGraph, path):
    """Write one directed arc per line as ``i j w``."""
    table = np.column_stack([graph.sources, graph.indices]).astype(np.int64)
    with open(path, "w") as fh:
        for (a, b), w in zip(table, graph.weights):
            fh.write(f"{a} {b} {w:.17g}\n")


def read_edgelist(path, n_vertices=None) -> WeightedGraph:
    data = np.loadtxt(path, ndmin=2, comments="#")
    if data.size == 0:
        return WeightedGraph.from_pairs(n_vertices or 0, [], [], [])
    a = data[:, 0].astype(np.int64)
    b = data[:, 1].astype(np.int64)
    n = int(n_vertices if n_vertices is not None else max(a.max(), b.max()) + 1)
    keep = a < b
    return WeightedGraph.from_pairs(n, a[keep], b[keep], data[keep, 2])
