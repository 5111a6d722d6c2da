"""Time the graph kernels and a full TV solve under both backends.

Each backend runs in its own interpreter because the choice is fixed at
import time by ``PCDENOISE_DISABLE_NUMBA``.

Usage: python benchmarks/bench_kernels.py [--n 200000] [--repeat 5]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from pcdenoise import _kernels
from pcdenoise.bench import add_noise, sample_manifold
from pcdenoise.denoise import DenoiseConfig, tv_denoise
from pcdenoise.graph import build_knn_graph

n, repeat = int(sys.argv[1]), int(sys.argv[2])
cloud = add_noise(sample_manifold("sphere", n, 0), 0.01, 0)
g = build_knn_graph(cloud, 10)
x = np.ascontiguousarray(cloud.points)
z = np.ascontiguousarray(np.random.default_rng(0).normal(size=(g.n_arcs, 3)))
calls = {
    "gradient": lambda: _kernels.arc_gradient(g.indptr, g.indices, g.sqrt_weights, x),
    "divergence": lambda: _kernels.arc_divergence(g.indptr, g.indices, g.sqrt_weights, g.rev, z),
    "laplacian": lambda: _kernels.shifted_laplacian_matvec(g.indptr, g.indices, g.weights, g.degrees, x, 1.0, 2.0),
    "group_shrink": lambda: _kernels.group_soft_threshold(z, 0.5),
}
out = {"backend": _kernels.backend()}
for name, fn in calls.items():
    fn()  # compile / warm up
    t = []
    for _ in range(repeat):
        t0 = time.perf_counter(); fn(); t.append(time.perf_counter() - t0)
    out[name] = min(t)
t0 = time.perf_counter()
tv_denoise(g, x, DenoiseConfig())
out["tv_solve"] = time.perf_counter() - t0
print(json.dumps(out))
"""


def run(n, repeat, disable):
    env = dict(os.environ, PCDENOISE_DISABLE_NUMBA="1" if disable else "0")
    res = subprocess.run([sys.executable, "-c", WORKER, str(n), str(repeat)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    numpy_t = run(args.n, args.repeat, True)
    numba_t = run(args.n, args.repeat, False)
    print(f"n = {args.n}, k = 10 (best of {args.repeat}; tv_solve is one run)")
    print(f"{'kernel':<14}{'numpy [s]':>12}{numba_t['backend'] + ' [s]':>12}{'speedup':>10}")
    for key in ("gradient", "divergence", "laplacian", "group_shrink", "tv_solve"):
        a, b = numpy_t[key], numba_t[key]
        print(f"{key:<14}{a:>12.4f}{b:>12.4f}{a / b:>9.1f}x")


if __name__ == "__main__":
    main()
