"""Command-line interface.

Subcommands::

    pcdenoise filter INPUT -o OUTDIR [--epsilon E] [--tau T | --percentile P]
    pcdenoise denoise INPUT -o OUTDIR [--regularizer tv|tikhonov] [--gamma G] ...
    pcdenoise bench -o OUTDIR [--shape plane|sphere|cube|all] [--n N] [--levels L]
    pcdenoise graph-stats INPUT [--graph knn|epsilon] [--k K] [--epsilon E]

Every option can also come from ``--config FILE`` (``key = value`` lines,
``#`` comments, keys spelled like the long options with ``_`` for ``-``).
Command-line flags override the file, which overrides the built-in defaults.
Each run writes its fully resolved settings to ``OUTDIR/config.txt``; passing
that file back through ``--config`` reproduces the run.

Exit status: 0 on success, 1 on errors, 3 when a solver did not converge
(outputs are still written).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, _kernels
from .bench import SHAPES, default_sigmas, export_sweep, run_sweep, write_plot_script
from .cloud import read_cloud, write_cloud
from .denoise import DenoiseConfig, iterative_denoise, write_diagnostics_csv
from .graph import GraphBuildParams, build_epsilon_graph, build_knn_graph, write_edgelist
from .outliers import degree_filter, write_report_csv

log = logging.getLogger("pcdenoise")

EXIT_OK, EXIT_ERROR, EXIT_NOT_CONVERGED = 0, 1, 3

# defaults for the graph and the outlier threshold
DEFAULTS = {
    "epsilon": 0.01,
    "k": 10,
    "theta": "auto",
    "filter_theta": "auto",
    "tau": 3.0,
    "percentile": None,
    "regularizer": "tv",
    "gamma": None,
    "rounds": 1,
    "rho": 1.0,
    "tv_coupling": "isotropic",
    "solver_tol": None,
    "max_iter": 1000,
    "k1": None,
    "k2": None,
    "no_filter": False,
    "format": None,
    "seed": 0,
    "shape": "all",
    "n": 10000,
    "levels": 9,
    "sigma_min": 1e-3,
    "sigma_max": 1e-1,
    "gamma_tik": None,
    "gamma_tv": None,
    "graph": "knn",
    "bins": 10,
    "edges": None,
}

_TYPES = {
    "epsilon": float, "k": int, "tau": float, "percentile": float, "gamma": float,
    "rounds": int, "rho": float, "solver_tol": float, "max_iter": int, "k1": int, "k2": int,
    "seed": int, "n": int, "levels": int, "sigma_min": float, "sigma_max": float,
    "gamma_tik": float, "gamma_tv": float, "bins": int,
}


def _theta(value):
    return value if value == "auto" else float(value)


def read_config(path):
    """Parse a ``key = value`` file into a dict of typed values."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if value.lower() in ("none", ""):
            out[key] = None
        elif key in _TYPES:
            out[key] = _TYPES[key](value)
        elif key in ("theta", "filter_theta"):
            out[key] = _theta(value)
        elif key == "no_filter":
            out[key] = value.lower() in ("1", "true", "yes")
        else:
            out[key] = value
    return out


def write_config(settings, path):
    lines = [f"# pcdenoise {__version__} resolved configuration"]
    for key in sorted(settings):
        value = settings[key]
        lines.append(f"{key} = {'none' if value is None else value}")
    Path(path).write_text("\n".join(lines) + "\n")


def resolve(args, keys):
    """Merge flags, config file and defaults for ``keys``."""
    file_cfg = read_config(args.config) if getattr(args, "config", None) else {}
    settings = {}
    for key in keys:
        flag = getattr(args, key, None)
        if flag is not None and flag is not False:
            settings[key] = flag
        elif key in file_cfg:
            settings[key] = file_cfg[key]
        else:
            settings[key] = DEFAULTS[key]
    for key in ("input", "output"):
        if hasattr(args, key):
            value = getattr(args, key)
            settings[key] = value if value is not None else file_cfg.get(key)
    return settings


FILTER_KEYS = ["epsilon", "filter_theta", "tau", "percentile", "format"]
DENOISE_KEYS = FILTER_KEYS + ["k", "theta", "k1", "k2", "regularizer", "gamma", "rounds", "rho",
                              "tv_coupling", "solver_tol", "max_iter", "no_filter"]
BENCH_KEYS = ["shape", "n", "levels", "sigma_min", "sigma_max", "k", "theta", "gamma_tik",
              "gamma_tv", "rho", "tv_coupling", "solver_tol", "max_iter", "seed"]
STATS_KEYS = ["graph", "k", "epsilon", "theta", "bins", "edges"]


def _outdir(settings):
    if not settings.get("output"):
        raise ValueError("an output directory is required (-o)")
    out = Path(settings["output"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _output_path(out, src, suffix, fmt):
    src = Path(src)
    ext = {"ply": ".ply", "xyz": ".xyz"}.get(fmt, src.suffix or ".ply")
    return out / f"{src.stem}_{suffix}{ext}"


def _run_filter(cloud, s):
    filtered, report = degree_filter(cloud, s["epsilon"], s["filter_theta"], s["tau"], s["percentile"])
    log.info("outlier filter: %s", report.summary())
    return filtered, report


def cmd_filter(args):
    s = resolve(args, FILTER_KEYS)
    if not s.get("input"):
        raise ValueError("an input cloud is required")
    out = _outdir(s)
    write_config(s, out / "config.txt")
    log.info("config: %s", s)
    cloud = read_cloud(s["input"])
    filtered, report = _run_filter(cloud, s)
    print(report.summary())
    dest = _output_path(out, s["input"], "filtered", s["format"])
    write_cloud(filtered, dest)
    write_report_csv(report, out / "filter_report.csv")
    log.info("wrote %s", dest)
    return EXIT_OK


def _denoise_config(s, gamma):
    return DenoiseConfig(gamma=gamma, solver_tol=s["solver_tol"], max_iter=s["max_iter"],
                         rho=s["rho"], tv_coupling=s["tv_coupling"])


def cmd_denoise(args):
    s = resolve(args, DENOISE_KEYS)
    if not s.get("input"):
        raise ValueError("an input cloud is required")
    out = _outdir(s)
    write_config(s, out / "config.txt")
    log.info("config: %s", s)
    cloud = read_cloud(s["input"])
    if not s["no_filter"]:
        cloud, report = _run_filter(cloud, s)
        print(report.summary())
        write_report_csv(report, out / "filter_report.csv")

    build = GraphBuildParams(k=s["k"], epsilon=s["epsilon"], theta=s["theta"], k1=s["k1"], k2=s["k2"])
    cfg = _denoise_config(s, s["gamma"])
    result, diags = iterative_denoise(cloud, build, cfg, s["rounds"], s["regularizer"])
    for r, diag in enumerate(diags, start=1):
        print(f"round {r} ({s['regularizer']}): {diag.summary()}")
        write_diagnostics_csv(diag, out / f"diagnostics_round{r}.csv")
    dest = _output_path(out, s["input"], "denoised", s["format"])
    write_cloud(result, dest)
    log.info("wrote %s", dest)
    return EXIT_OK if all(d.converged for d in diags) else EXIT_NOT_CONVERGED


def cmd_bench(args):
    s = resolve(args, BENCH_KEYS)
    out = _outdir(s)
    write_config(s, out / "config.txt")
    log.info("config: %s", s)
    shapes = SHAPES if s["shape"] == "all" else (s["shape"],)
    sigmas = default_sigmas(s["levels"], s["sigma_min"], s["sigma_max"])
    build = GraphBuildParams(k=s["k"], theta=s["theta"])
    cfgs = (_denoise_config(s, s["gamma_tik"]), _denoise_config(s, s["gamma_tv"]))
    status = EXIT_OK
    for shape in shapes:
        result = run_sweep(shape, s["n"], sigmas, build, cfgs, s["seed"])
        csv_path = out / f"{shape}.csv"
        export_sweep(result, csv_path)
        write_plot_script(csv_path, out / f"{shape}.gp", title=shape)
        for row in result.rows():
            print(f"{shape} sigma={row[0]:.4g} noisy={row[1]:.5g} tik={row[2]:.5g} tv={row[3]:.5g}")
        if not np.all(result.converged):
            status = EXIT_NOT_CONVERGED
    return status


def cmd_graph_stats(args):
    s = resolve(args, STATS_KEYS)
    if not s.get("input"):
        raise ValueError("an input cloud is required")
    from scipy.sparse.csgraph import connected_components

    cloud = read_cloud(s["input"])
    if s["graph"] == "epsilon":
        graph = build_epsilon_graph(cloud, s["epsilon"], s["theta"])
    else:
        graph = build_knn_graph(cloud, s["k"], s["theta"])
    n_comp, _ = connected_components(graph.adjacency(), directed=False)
    deg = graph.degrees
    print(f"vertices: {graph.n_vertices}")
    print(f"edges: {graph.n_edges}")
    print(f"connected components: {n_comp}")
    print(f"isolated vertices: {int(np.sum(np.diff(graph.indptr) == 0))}")
    print(f"degree min/mean/max: {deg.min():.6g} / {deg.mean():.6g} / {deg.max():.6g}")
    counts, edges = np.histogram(deg, bins=s["bins"])
    print("degree histogram:")
    for c, lo, hi in zip(counts, edges[:-1], edges[1:]):
        print(f"  [{lo:.4g}, {hi:.4g}) {c}")
    if s["edges"]:
        write_edgelist(graph, s["edges"])
    return EXIT_OK


def _add_common(p):
    p.add_argument("--config", help="key = value settings file")
    p.add_argument("-v", "--verbose", action="store_true")


def _add_filter_opts(p):
    p.add_argument("--epsilon", type=float, help="neighbourhood radius (default 0.01)")
    p.add_argument("--filter-theta", dest="filter_theta", type=_theta,
                   help="kernel bandwidth of the epsilon graph, or 'auto'")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--tau", type=float, help="degree threshold (default 3)")
    g.add_argument("--percentile", type=float, help="remove this fraction of lowest-degree points")
    p.add_argument("--format", choices=["ply", "xyz"], help="output format (default: input's)")


def _add_solver_opts(p):
    p.add_argument("--k", type=int, help="neighbours per point (default 10)")
    p.add_argument("--theta", type=_theta, help="kernel bandwidth, or 'auto'")
    p.add_argument("--rho", type=float, help="initial ADMM penalty")
    p.add_argument("--tv-coupling", dest="tv_coupling", choices=["anisotropic", "isotropic"])
    p.add_argument("--solver-tol", dest="solver_tol", type=float)
    p.add_argument("--max-iter", dest="max_iter", type=int)


def build_parser():
    ap = argparse.ArgumentParser(prog="pcdenoise", description="Graph-based point cloud denoising.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("filter", help="remove outliers by epsilon-graph degree")
    p.add_argument("input", nargs="?")
    p.add_argument("-o", "--output", help="output directory")
    _add_filter_opts(p)
    _add_common(p)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("denoise", help="outlier removal followed by position denoising")
    p.add_argument("input", nargs="?")
    p.add_argument("-o", "--output", help="output directory")
    _add_filter_opts(p)
    _add_solver_opts(p)
    p.add_argument("--no-filter", dest="no_filter", action="store_true", help="skip outlier removal")
    p.add_argument("--regularizer", choices=["tv", "tikhonov"])
    p.add_argument("--gamma", type=float, help="regularisation weight")
    p.add_argument("--rounds", type=int, help="graph rebuild / denoise rounds (default 1)")
    p.add_argument("--k1", type=int, help="intra-frame neighbours (time series)")
    p.add_argument("--k2", type=int, help="neighbours in each adjacent frame (time series)")
    _add_common(p)
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("bench", help="synthetic noise sweep")
    p.add_argument("-o", "--output", help="output directory")
    p.add_argument("--shape", choices=list(SHAPES) + ["all"])
    p.add_argument("--n", type=int, help="samples per shape (default 10000)")
    p.add_argument("--levels", type=int, help="number of noise levels (default 9)")
    p.add_argument("--sigma-min", dest="sigma_min", type=float)
    p.add_argument("--sigma-max", dest="sigma_max", type=float)
    p.add_argument("--gamma-tik", dest="gamma_tik", type=float)
    p.add_argument("--gamma-tv", dest="gamma_tv", type=float)
    p.add_argument("--seed", type=int)
    _add_solver_opts(p)
    _add_common(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("graph-stats", help="degree histogram, edge and component counts")
    p.add_argument("input", nargs="?")
    p.add_argument("--graph", choices=["knn", "epsilon"])
    p.add_argument("--k", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--theta", type=_theta)
    p.add_argument("--bins", type=int)
    p.add_argument("--edges", help="also write the arc list 'i j w' here")
    _add_common(p)
    p.set_defaults(func=cmd_graph_stats)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    log.info("kernel backend: %s", _kernels.backend())
    try:
        return args.func(args)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"pcdenoise {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
