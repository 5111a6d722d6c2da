import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from pcdenoise.bench import ManifoldSpec, add_noise, mean_error, sample_manifold
from pcdenoise.graph import GraphBuildParams, WeightedGraph, build_knn_graph
from pcdenoise.denoise import (
    DenoiseConfig,
    conjugate_gradient,
    denoise,
    iterative_denoise,
    soft_threshold,
    tikhonov_denoise,
    tikhonov_objective,
    tv_denoise,
    tv_objective,
    write_diagnostics_csv,
)

EDGE = WeightedGraph.from_pairs(2, [0], [1], [1.0])


def random_graph(rng, n=20, p=0.3):
    W = oracles.random_weighted_graph(rng, n, p)
    return W, WeightedGraph.from_dense(W)


# ---------------------------------------------------------------- shrinkage

def test_soft_threshold_examples():
    np.testing.assert_array_equal(soft_threshold(np.array([5.0, -5.0, 1.0]), 2.0), [3.0, -3.0, 0.0])
    np.testing.assert_allclose(soft_threshold(np.array([3.0, 4.0]), 2.5, block=True), [1.5, 2.0])
    np.testing.assert_array_equal(soft_threshold(np.zeros((2, 3)), 1.0, block=True), 0.0)
    with pytest.raises(ValueError):
        soft_threshold(np.ones(2), -1.0)


# ---------------------------------------------------------------- Tikhonov

def test_tikhonov_two_point():
    x, diag = tikhonov_denoise(EDGE, [0.0, 1.0], DenoiseConfig(gamma=0.5))
    np.testing.assert_allclose(x, [1 / 3, 2 / 3], atol=1e-12)
    assert diag.converged


@pytest.mark.parametrize("reg", ["tikhonov", "tv"])
def test_identity_cases(rng, reg):
    _, g = random_graph(rng)
    f = rng.normal(size=(20, 3))
    x, _ = denoise(g, f, DenoiseConfig(gamma=0.0), reg)
    np.testing.assert_array_equal(x, f)
    c = np.tile([1.0, -2.0, 3.5], (20, 1))
    x, _ = denoise(g, c, DenoiseConfig(gamma=0.7), reg)
    np.testing.assert_allclose(x, c, atol=1e-12)


def test_tikhonov_matches_spectral_filter(rng):
    for n in (10, 50, 100):
        W, g = random_graph(rng, n, 0.15)
        f = rng.normal(size=(n, 3))
        x, diag = tikhonov_denoise(g, f, DenoiseConfig(gamma=0.8, solver_tol=1e-12))
        np.testing.assert_allclose(x, oracles.spectral_tikhonov(W, f, 0.8), atol=1e-8)


def test_tikhonov_residual_and_objective(rng):
    W, g = random_graph(rng, 40)
    f = rng.normal(size=(40, 3))
    gamma = 0.3
    x, diag = tikhonov_denoise(g, f, DenoiseConfig(gamma=gamma))
    A = np.eye(40) + 2 * gamma * oracles.laplacian(W)
    assert np.linalg.norm(A @ x - f) / np.linalg.norm(f) <= 1e-6
    obj = tikhonov_objective(g, x, f, gamma)
    assert obj <= tikhonov_objective(g, f, f, gamma)
    for _ in range(20):
        assert obj <= tikhonov_objective(g, x + 1e-3 * rng.normal(size=x.shape), f, gamma)


def test_tikhonov_nonconvergence_reported(rng):
    _, g = random_graph(rng, 60)
    x, diag = tikhonov_denoise(g, rng.normal(size=60), DenoiseConfig(gamma=5.0, max_iter=1))
    assert not diag.converged and diag.iterations == 1
    assert np.all(np.isfinite(x))


def test_conjugate_gradient_block(rng):
    W, g = random_graph(rng, 30)
    b = rng.normal(size=(30, 2))
    x, it, res = conjugate_gradient(g, 2.0, 3.0, b, tol=1e-12)
    A = 2 * np.eye(30) + 3 * oracles.laplacian(W)
    np.testing.assert_allclose(x, np.linalg.solve(A, b), atol=1e-10)
    assert res.shape == (2,) and np.all(res <= 1e-12)


# ---------------------------------------------------------------- TV

@pytest.mark.parametrize("gamma", [0.05, 0.1, 0.25, 0.4])
@pytest.mark.parametrize("coupling", ["anisotropic", "isotropic"])
def test_tv_two_point_closed_form(gamma, coupling):
    cfg = DenoiseConfig(gamma=gamma, solver_tol=1e-10, tv_coupling=coupling)
    x, diag = tv_denoise(EDGE, np.array([0.0, 1.0]), cfg)
    np.testing.assert_allclose(x, [gamma, 1 - gamma], atol=1e-8)
    assert diag.converged


@pytest.mark.parametrize("coupling", ["anisotropic", "isotropic"])
def test_tv_matches_dual_oracle(rng, coupling):
    W, g = random_graph(rng, 15, 0.4)
    f = rng.normal(size=(15, 3))
    gamma = 0.3
    cfg = DenoiseConfig(gamma=gamma, solver_tol=1e-8, tv_coupling=coupling, max_iter=5000)
    x, diag = tv_denoise(g, f, cfg)
    assert diag.converged
    ref = oracles.tv_dual(W, f, gamma, isotropic=coupling == "isotropic")
    np.testing.assert_allclose(x, ref, atol=1e-5)


@pytest.mark.parametrize("coupling", ["anisotropic", "isotropic"])
def test_tv_objective_dominance(rng, coupling):
    _, g = random_graph(rng, 60, 0.1)
    f = rng.normal(size=(60, 3))
    gamma = 0.2
    x, diag = tv_denoise(g, f, DenoiseConfig(gamma=gamma, tv_coupling=coupling))
    assert diag.converged
    assert diag.primal_trace[-1] <= 1e-4 and diag.dual_trace[-1] <= 1e-4
    obj = tv_objective(g, x, f, gamma, coupling)
    xt, _ = tikhonov_denoise(g, f, DenoiseConfig(gamma=gamma))
    assert obj <= tv_objective(g, f, f, gamma, coupling)
    assert obj <= tv_objective(g, xt, f, gamma, coupling)


def test_tv_nonconvergence_reported(rng):
    _, g = random_graph(rng, 40)
    x, diag = tv_denoise(g, rng.normal(size=(40, 3)), DenoiseConfig(gamma=0.5, max_iter=2))
    assert not diag.converged and diag.iterations == 2
    assert len(diag.objective_trace) == 2


# ---------------------------------------------------------------- equivariance

@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from(["tikhonov", "tv"]))
def test_translation_and_permutation_equivariance(seed, reg):
    rng = np.random.default_rng(seed)
    W = oracles.random_weighted_graph(rng, 25, 0.25)
    g = WeightedGraph.from_dense(W)
    f = rng.normal(size=(25, 3))
    cfg = DenoiseConfig(gamma=0.3, solver_tol=1e-9 if reg == "tv" else 1e-12, max_iter=5000)
    x, _ = denoise(g, f, cfg, reg)

    c = rng.normal(size=3) * 10
    xc, _ = denoise(g, f + c, cfg, reg)
    np.testing.assert_allclose(xc, x + c, atol=1e-6)

    perm = rng.permutation(25)
    gp = WeightedGraph.from_dense(W[np.ix_(perm, perm)])
    xp, _ = denoise(gp, f[perm], cfg, reg)
    np.testing.assert_allclose(xp, x[perm], atol=1e-6)


# ---------------------------------------------------------------- iterative

def test_iterative_rounds_one_is_single_pass(rng):
    cloud = add_noise(sample_manifold(ManifoldSpec("plane"), 500, seed=1), 0.01, seed=2)
    cfg = DenoiseConfig(gamma=0.25)
    out, diags = iterative_denoise(cloud, GraphBuildParams(k=8), cfg, rounds=1)
    x, _ = tikhonov_denoise(build_knn_graph(cloud, 8), cloud.points, cfg)
    np.testing.assert_array_equal(out.points, x)
    assert len(diags) == 1


def test_iterative_second_round_not_worse():
    spec = ManifoldSpec("plane")
    cloud = add_noise(sample_manifold(spec, 3000, seed=3), 0.01, seed=4)
    cfg = DenoiseConfig()
    one, _ = iterative_denoise(cloud, GraphBuildParams(k=10), cfg, rounds=1)
    two, diags = iterative_denoise(cloud, GraphBuildParams(k=10), cfg, rounds=2)
    assert len(diags) == 2
    assert mean_error(two, spec) <= mean_error(one, spec) + 1e-9


def test_iterative_gamma_zero_identity(rng):
    from pcdenoise.cloud import PointCloud
    cloud = PointCloud(rng.random((100, 3)))
    for reg in ("tikhonov", "tv"):
        out, _ = iterative_denoise(cloud, GraphBuildParams(k=5), DenoiseConfig(gamma=0.0), 3, reg)
        np.testing.assert_array_equal(out.points, cloud.points)
    with pytest.raises(ValueError):
        iterative_denoise(cloud, GraphBuildParams(k=5), DenoiseConfig(), rounds=0)


def test_config_validation():
    for bad in (dict(gamma=-1), dict(solver_tol=0), dict(max_iter=0), dict(rho=0),
                dict(tv_coupling="x")):
        with pytest.raises(ValueError):
            DenoiseConfig(**bad).validate()
    with pytest.raises(ValueError):
        denoise(EDGE, [0.0, 1.0], None, "wavelet")


def test_diagnostics_csv(tmp_path, rng):
    _, g = random_graph(rng, 30)
    _, diag = tv_denoise(g, rng.normal(size=(30, 3)), DenoiseConfig(gamma=0.2))
    path = tmp_path / "d.csv"
    write_diagnostics_csv(diag, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "iteration,objective,primal_residual,dual_residual"
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    assert data.shape == (diag.iterations, 4)
    np.testing.assert_array_equal(data[:, 1], diag.objective_trace)
