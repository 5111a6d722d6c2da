"""Coarse grid search for the default regularisation weights.

Runs at the middle of the default noise grid (sigma = 0.01) with n = 10000
samples and the default k-NN graph (k = 10, automatic theta), over several
seeds, and reports median mean-distance errors for every shape.

The weights are calibrated, not derived: the pair (tikhonov, tv) is the
grid point maximising the smallest relative margin over these conditions
on the median errors:

* plane: Tikhonov at most half the noisy error;
* plane: Tikhonov error below TV error;
* cube: TV error at most the Tikhonov error;
* sphere and cube: both regularisers remove at least 20% of the error.

On the plane alone larger weights always help; the curved shapes are what
bound them from above.

Usage: python benchmarks/tune_gamma.py [--seeds 5]
"""

import argparse

import numpy as np

from pcdenoise.bench import SHAPES, add_noise, mean_error, sample_manifold
from pcdenoise.denoise import DenoiseConfig, tikhonov_denoise, tv_denoise
from pcdenoise.graph import build_knn_graph

TIK_GRID = [0.1, 0.15, 0.175, 0.2, 0.225, 0.25, 0.275, 0.3, 0.4]
TV_GRID = [0.002, 0.003, 0.0035, 0.004, 0.0045, 0.005, 0.0075, 0.01]


def margin(res, g_tik, g_tv):
    """Smallest relative slack over the calibration conditions."""
    ratios = {s: (res[s][1][g_tik] / res[s][0], res[s][2][g_tv] / res[s][0]) for s in SHAPES}
    tik_p, tv_p = ratios["plane"]
    tik_c, tv_c = ratios["cube"]
    slack = [
        (0.5 - tik_p) / 0.5,
        (tv_p - tik_p) / tik_p,
        (tik_c - tv_c) / tik_c,
    ]
    for s in ("sphere", "cube"):
        slack += [(0.8 - r) / 0.8 for r in ratios[s]]
    return min(slack)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--sigma", type=float, default=0.01)
    ap.add_argument("--n", type=int, default=10000)
    args = ap.parse_args()

    res = {}
    for shape in SHAPES:
        noisy, tik, tv = [], {g: [] for g in TIK_GRID}, {g: [] for g in TV_GRID}
        for seed in range(args.seeds):
            cloud = add_noise(sample_manifold(shape, args.n, seed), args.sigma, seed)
            graph = build_knn_graph(cloud, 10)
            noisy.append(mean_error(cloud, shape))
            for g in TIK_GRID:
                tik[g].append(mean_error(tikhonov_denoise(graph, cloud.points, DenoiseConfig(gamma=g))[0], shape))
            for g in TV_GRID:
                tv[g].append(mean_error(tv_denoise(graph, cloud.points, DenoiseConfig(gamma=g))[0], shape))
        res[shape] = (np.median(noisy), {g: np.median(v) for g, v in tik.items()},
                      {g: np.median(v) for g, v in tv.items()})
        base, tk, tvv = res[shape]
        print(f"{shape}: noisy {base:.5f}")
        print("  tikhonov " + "  ".join(f"{g}:{e / base:.3f}" for g, e in tk.items()))
        print("  tv       " + "  ".join(f"{g}:{e / base:.3f}" for g, e in tvv.items()))

    scores = {(a, b): margin(res, a, b) for a in TIK_GRID for b in TV_GRID}
    g_tik, g_tv = max(scores, key=scores.get)
    print(f"selected: tikhonov gamma={g_tik}  tv gamma={g_tv}  (min margin {scores[g_tik, g_tv]:.3f})")
    for shape in SHAPES:
        base, tk, tvv = res[shape]
        print(f"  {shape}: tik {tk[g_tik] / base:.3f}  tv {tvv[g_tv] / base:.3f}  (ratio to noisy)")


if __name__ == "__main__":
    main()
