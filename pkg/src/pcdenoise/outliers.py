"""Outlier removal by thresholding weighted degree on an epsilon graph."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .cloud import PointCloud
from .graph import build_epsilon_graph

__all__ = ["FilterReport", "OutlierRemovalError", "degree_filter", "tau_from_percentile", "write_report_csv"]


class OutlierRemovalError(RuntimeError):
    """The threshold removed every point."""


@dataclass(frozen=True, eq=False)
class FilterReport:
    kept_indices: np.ndarray
    removed_indices: np.ndarray
    tau: float
    degrees: np.ndarray

    @property
    def n_kept(self):
        return int(self.kept_indices.size)

    @property
    def n_removed(self):
        return int(self.removed_indices.size)

    def summary(self):
        return (f"tau={self.tau:.6g} kept={self.n_kept} removed={self.n_removed} "
                f"of {self.degrees.size}")


def tau_from_percentile(degrees, pct) -> float:
    """Threshold that removes the lowest ``ceil(pct * n)`` degrees.

    Nearest-rank rule: with degrees sorted ascending, ``tau`` is the value at
    0-based rank ``ceil(pct * n)``, so a strict ``degree < tau`` test drops
    exactly that many vertices unless ties straddle the cut. ``pct = 1``
    returns a value just above the maximum, removing everything.
    """
    deg = np.sort(np.asarray(degrees, dtype=np.float64).ravel())
    if deg.size == 0:
        raise ValueError("no degrees given")
    if not 0.0 <= pct <= 1.0:
        raise ValueError("pct must lie in [0, 1]")
    # guard against 0.3 * 10 -> 3.0000000000000004
    rank = math.ceil(round(pct * deg.size, 9))
    if rank >= deg.size:
        return float(np.nextafter(deg[-1], np.inf))
    return float(deg[rank])


def degree_filter(cloud: PointCloud, epsilon=0.01, theta="auto", tau=3.0, pct=None, graph=None):
    """Drop points whose weighted epsilon-graph degree is below ``tau``.

    Args:
        cloud: input cloud.
        epsilon: neighbourhood radius.
        theta: kernel bandwidth or ``"auto"``.
        tau: degree threshold; a point is removed iff ``degree < tau``.
        pct: if given, ``tau`` is replaced by :func:`tau_from_percentile`.
        graph: a prebuilt epsilon graph to reuse.

    Returns:
        ``(filtered_cloud, FilterReport)``; surviving points keep their
        relative order.

    Raises:
        OutlierRemovalError: every point fell below the threshold.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be > 0")
    if graph is None:
        graph = build_epsilon_graph(cloud, epsilon, theta)
    degrees = graph.degrees.copy()
    if pct is not None:
        tau = tau_from_percentile(degrees, pct)
    if not tau >= 0:
        raise ValueError("tau must be >= 0")
    keep = degrees >= tau
    report = FilterReport(np.flatnonzero(keep), np.flatnonzero(~keep), float(tau), degrees)
    if report.n_kept == 0:
        raise OutlierRemovalError(f"tau={tau:g} removes all {degrees.size} points")
    return cloud.select(report.kept_indices), report


def write_report_csv(report: FilterReport, path):
    """CSV with columns ``index,degree,kept``."""
    kept = np.zeros(report.degrees.size, dtype=bool)
    kept[report.kept_indices] = True
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "degree", "kept"])
        for i, (d, k) in enumerate(zip(report.degrees, kept)):
            w.writerow([i, repr(float(d)), int(k)])
