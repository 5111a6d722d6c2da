"""Full pipeline on a large synthetic cloud: degree filter, then one TV round.

Prints timings and the peak resident memory of the process.

Usage: python benchmarks/scale_smoke.py [--n 1000000] [--regularizer tv]
"""

import argparse
import resource
import time

import numpy as np

from pcdenoise import DenoiseConfig, PointCloud, GraphBuildParams, degree_filter, iterative_denoise
from pcdenoise.bench import add_noise, mean_error, sample_manifold


def planted_cloud(n, sigma, n_outliers, seed):
    clean = sample_manifold("sphere", n, seed)
    noisy = add_noise(clean, sigma, seed)
    rng = np.random.default_rng(seed + 1)
    outliers = rng.uniform(-3.0, 3.0, size=(n_outliers, 3))
    return PointCloud(np.vstack([noisy.points, outliers]))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=1_000_000)
    ap.add_argument("--sigma", type=float, default=0.002)
    ap.add_argument("--outliers", type=int, default=1000)
    ap.add_argument("--regularizer", default="tv")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    t0 = time.perf_counter()
    cloud = planted_cloud(args.n, args.sigma, args.outliers, args.seed)
    t1 = time.perf_counter()
    filtered, report = degree_filter(cloud, epsilon=0.01, tau=3.0)
    t2 = time.perf_counter()
    print(f"filter: {report.summary()}  ({t2 - t1:.1f}s)", flush=True)
    out, diags = iterative_denoise(filtered, GraphBuildParams(k=10), DenoiseConfig(), 1, args.regularizer)
    t3 = time.perf_counter()
    print(f"denoise: {diags[0].summary()}  ({t3 - t2:.1f}s)")
    print(f"mean error: noisy {mean_error(filtered, 'sphere'):.6f}  denoised {mean_error(out, 'sphere'):.6f}")
    peak = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024.0
    print(f"total {t3 - t0:.1f}s  peak RSS {peak:.0f} MiB")


if __name__ == "__main__":
    main()
