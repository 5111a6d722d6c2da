"""Synthetic evaluation: noisy samples of known surfaces, error before/after.

Shapes are canonical: the unit square ``[0,1]^2`` in the z=0 plane, the unit
sphere at the origin, and the surface of the cube ``[-1,1]^3``. Noise levels
are standard deviations in those units.
"""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cloud import PointCloud
from .denoise import DenoiseConfig, tikhonov_denoise, tv_denoise
from .graph import GraphBuildParams, build_graph

__all__ = [
    "SHAPES",
    "ManifoldSpec",
    "SweepResult",
    "default_sigmas",
    "sample_manifold",
    "add_noise",
    "distance_to_manifold",
    "mean_error",
    "run_sweep",
    "export_sweep",
    "read_sweep",
    "write_plot_script",
]

log = logging.getLogger(__name__)

SHAPES = ("plane", "sphere", "cube")
CSV_HEADER = ["sigma", "err_noisy", "err_tik", "err_tv", "n", "seed"]


@dataclass(frozen=True)
class ManifoldSpec:
    kind: str

    def __post_init__(self):
        if self.kind not in SHAPES:
            raise ValueError(f"unknown manifold {self.kind!r}; choose from {SHAPES}")


def default_sigmas(levels=9, lo=1e-3, hi=1e-1):
    """``levels`` noise levels log-spaced over ``[lo, hi]``."""
    return np.logspace(np.log10(lo), np.log10(hi), int(levels))


def _spec(spec):
    return spec if isinstance(spec, ManifoldSpec) else ManifoldSpec(spec)


def sample_manifold(spec, n, seed=0) -> PointCloud:
    """``n`` i.i.d. area-uniform samples on the surface."""
    kind = _spec(spec).kind
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    if kind == "plane":
        pts = np.column_stack([rng.random((n, 2)), np.zeros(n)])
    elif kind == "sphere":
        g = rng.standard_normal((n, 3))
        pts = g / np.linalg.norm(g, axis=1, keepdims=True)
    else:
        # faces have equal area: pick one uniformly, then a point on it
        face = rng.integers(0, 6, size=n)
        uv = rng.uniform(-1.0, 1.0, size=(n, 2))
        axis = face // 2
        sign = np.where(face % 2 == 0, 1.0, -1.0)
        pts = np.empty((n, 3))
        for a in range(3):
            sel = axis == a
            others = [b for b in range(3) if b != a]
            pts[sel, a] = sign[sel]
            pts[sel, others[0]] = uv[sel, 0]
            pts[sel, others[1]] = uv[sel, 1]
    return PointCloud(pts)


def cube_face_of(points):
    """Face label 0..5 (+x, -x, +y, -y, +z, -z) of points on the cube."""
    p = np.asarray(points)
    axis = np.argmax(np.abs(p), axis=1)
    neg = p[np.arange(p.shape[0]), axis] < 0
    return 2 * axis + neg


def add_noise(cloud: PointCloud, sigma, seed=0) -> PointCloud:
    """Add i.i.d. N(0, sigma^2) offsets to every coordinate."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return cloud.with_points(cloud.points)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 1]))
    noise = rng.standard_normal(cloud.points.shape)
    return cloud.with_points(cloud.points + sigma * noise)


def distance_to_manifold(p, spec) -> np.ndarray | float:
    """Exact Euclidean distance from position(s) ``p`` to the surface."""
    kind = _spec(spec).kind
    arr = np.asarray(p, dtype=np.float64)
    single = arr.ndim == 1
    pts = arr.reshape(-1, 3)
    if kind == "plane":
        nearest = np.column_stack([np.clip(pts[:, 0], 0.0, 1.0), np.clip(pts[:, 1], 0.0, 1.0),
                                   np.zeros(pts.shape[0])])
        d = np.linalg.norm(pts - nearest, axis=1)
    elif kind == "sphere":
        d = np.abs(np.linalg.norm(pts, axis=1) - 1.0)
    else:
        outside = np.linalg.norm(pts - np.clip(pts, -1.0, 1.0), axis=1)
        inside = 1.0 - np.abs(pts).max(axis=1)
        d = np.where(outside > 0, outside, inside)
    return float(d[0]) if single else d


def mean_error(cloud_or_points, spec) -> float:
    pts = cloud_or_points.points if isinstance(cloud_or_points, PointCloud) else cloud_or_points
    return float(np.mean(distance_to_manifold(pts, spec)))


@dataclass
class SweepResult:
    shape: str
    noise_levels: np.ndarray
    mean_error_noisy: np.ndarray
    mean_error_tik: np.ndarray
    mean_error_tv: np.ndarray
    n: np.ndarray
    seed: np.ndarray
    converged: np.ndarray = field(default=None)

    def rows(self):
        for k in range(len(self.noise_levels)):
            yield (float(self.noise_levels[k]), float(self.mean_error_noisy[k]),
                   float(self.mean_error_tik[k]), float(self.mean_error_tv[k]),
                   int(self.n[k]), int(self.seed[k]))


def _config_pair(cfg):
    if isinstance(cfg, tuple):
        return cfg
    return cfg, cfg


def run_sweep(spec, n=10000, sigmas=None, build: GraphBuildParams | None = None,
              cfg: DenoiseConfig | tuple | None = None, seed=0) -> SweepResult:
    """Denoise noisy samples of ``spec`` at each noise level.

    The same clean sample and the same standard-normal draws (scaled by each
    sigma) are used at every level, and the same noisy cloud feeds both
    regularisers. Each level builds a fresh k-NN graph from its noisy cloud.

    Args:
        spec: manifold or its name.
        n: samples per level.
        sigmas: noise levels; defaults to :func:`default_sigmas`.
        build: graph parameters (k-NN mode).
        cfg: one :class:`DenoiseConfig` for both regularisers, or a
            ``(tikhonov_cfg, tv_cfg)`` pair.
        seed: RNG seed.
    """
    spec = _spec(spec)
    sigmas = default_sigmas() if sigmas is None else np.asarray(sigmas, dtype=np.float64)
    if sigmas.size == 0:
        raise ValueError("empty noise grid")
    build = build or GraphBuildParams()
    cfg_tik, cfg_tv = _config_pair(cfg or sweep_configs())
    clean = sample_manifold(spec, n, seed)

    noisy_err, tik_err, tv_err, conv = [], [], [], []
    for sigma in sigmas:
        t0 = time.perf_counter()
        noisy = add_noise(clean, float(sigma), seed)
        graph = build_graph(noisy, build)
        x_tik, d_tik = tikhonov_denoise(graph, noisy.points, cfg_tik)
        x_tv, d_tv = tv_denoise(graph, noisy.points, cfg_tv)
        noisy_err.append(mean_error(noisy, spec))
        tik_err.append(mean_error(x_tik, spec))
        tv_err.append(mean_error(x_tv, spec))
        conv.append(d_tik.converged and d_tv.converged)
        log.info("%s sigma=%.4g noisy=%.5g tik=%.5g tv=%.5g (%.1fs)", spec.kind, sigma,
                 noisy_err[-1], tik_err[-1], tv_err[-1], time.perf_counter() - t0)

    m = sigmas.size
    return SweepResult(spec.kind, sigmas.copy(), np.array(noisy_err), np.array(tik_err),
                       np.array(tv_err), np.full(m, int(n)), np.full(m, int(seed)), np.array(conv))


def sweep_configs():
    """Default ``(tikhonov, tv)`` solver configs used by the benchmark."""
    return DenoiseConfig(), DenoiseConfig()


def export_sweep(result: SweepResult, path):
    """Write the sweep as CSV (``sigma,err_noisy,err_tik,err_tv,n,seed``)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for sigma, e0, e1, e2, n, seed in result.rows():
            w.writerow([repr(sigma), repr(e0), repr(e1), repr(e2), n, seed])


def read_sweep(path, shape="unknown") -> SweepResult:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        rows = [r for r in reader if r]
    cols = list(zip(*rows)) if rows else [()] * 6
    f = lambda c: np.array([float(v) for v in c])  # noqa: E731
    i = lambda c: np.array([int(v) for v in c], dtype=np.int64)  # noqa: E731
    return SweepResult(shape, f(cols[0]), f(cols[1]), f(cols[2]), f(cols[3]), i(cols[4]), i(cols[5]))


def write_plot_script(csv_path, script_path, title=None):
    """Gnuplot script plotting the three error series against log sigma."""
    csv_path = Path(csv_path)
    title = title or csv_path.stem
    png = csv_path.with_suffix(".png").name
    script = f"""set datafile separator ','
set terminal pngcairo size 640,480
set output '{png}'
set title '{title}'
set logscale x
set xlabel 'input noise sigma'
set ylabel 'mean distance to surface'
set key top left
plot '{csv_path.name}' every ::1 using 1:2 with linespoints pt 1 lc rgb 'blue' title 'noisy', \\
     '' every ::1 using 1:4 with linespoints pt 2 lc rgb 'red' title 'TV', \\
     '' every ::1 using 1:3 with linespoints pt 6 lc rgb 'orange' title 'Tikhonov'
"""
    Path(script_path).write_text(script)
