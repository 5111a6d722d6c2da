import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from pcdenoise.cloud import PointCloud
from pcdenoise.outliers import (
    OutlierRemovalError,
    degree_filter,
    tau_from_percentile,
    write_report_csv,
)


def cube_with_outliers(rng, n=2000, m=20):
    cube = rng.random((n, 3))
    far = rng.normal(size=(m, 3))
    far = 10.0 * far / np.linalg.norm(far, axis=1, keepdims=True) + 0.5
    return PointCloud(np.vstack([cube, far])), n


def test_tau_zero_keeps_everything(rng):
    cloud = PointCloud(rng.random((200, 3)))
    out, rep = degree_filter(cloud, epsilon=0.05, tau=0.0)
    assert rep.n_removed == 0 and len(out) == 200


def test_planted_outliers_removed(rng):
    cloud, n = cube_with_outliers(rng)
    eps = 0.15
    out, rep = degree_filter(cloud, epsilon=eps, tau=3.0)
    assert set(range(n, n + 20)) <= set(rep.removed_indices.tolist())
    assert rep.n_kept >= 0.99 * n
    # brute-force degree check
    W = oracles.epsilon_graph(cloud.points, eps)
    np.testing.assert_allclose(rep.degrees, W.sum(axis=1), rtol=1e-12)
    np.testing.assert_array_equal(rep.kept_indices, np.flatnonzero(W.sum(axis=1) >= 3.0))
    np.testing.assert_array_equal(out.points, cloud.points[rep.kept_indices])


def test_all_removed_raises(rng):
    cloud = PointCloud(rng.random((20, 3)) * 100)
    with pytest.raises(OutlierRemovalError):
        degree_filter(cloud, epsilon=0.01, tau=1.0)


def test_invalid_arguments(rng):
    cloud = PointCloud(rng.random((20, 3)))
    with pytest.raises(ValueError):
        degree_filter(cloud, epsilon=0.0)
    with pytest.raises(ValueError):
        degree_filter(cloud, epsilon=0.1, tau=-1.0)


def test_tau_from_percentile_examples():
    deg = np.arange(10.0)
    assert tau_from_percentile(deg, 0.3) == 3.0
    assert tau_from_percentile(deg, 0.0) == 0.0
    assert np.sum(deg < tau_from_percentile(deg, 0.3)) == 3
    assert tau_from_percentile(np.full(7, 2.5), 0.6) == 2.5
    assert tau_from_percentile(deg, 1.0) > 9.0
    with pytest.raises(ValueError):
        tau_from_percentile([], 0.5)
    with pytest.raises(ValueError):
        tau_from_percentile(deg, 1.5)


def test_percentile_mode(rng):
    cloud, _ = cube_with_outliers(rng, 500, 5)
    _, rep = degree_filter(cloud, epsilon=0.2, pct=0.1)
    assert rep.n_removed == int(np.ceil(0.1 * 505))


def test_report_csv(tmp_path, rng):
    cloud, _ = cube_with_outliers(rng, 300, 3)
    _, rep = degree_filter(cloud, epsilon=0.2, tau=1.0)
    path = tmp_path / "r.csv"
    write_report_csv(rep, path)
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert path.read_text().splitlines()[0] == "index,degree,kept"
    np.testing.assert_array_equal(data[:, 0], np.arange(303))
    np.testing.assert_array_equal(data[:, 1], rep.degrees)
    np.testing.assert_array_equal(np.flatnonzero(data[:, 2]), rep.kept_indices)


@settings(max_examples=30, deadline=None)
@given(st.integers(5, 80), st.floats(0.05, 0.5), st.floats(0, 4), st.floats(0, 4),
       st.integers(0, 2**31))
def test_partition_and_monotonicity(n, eps, t1, t2, seed):
    cloud = PointCloud(np.random.default_rng(seed).random((n, 3)))
    lo, hi = sorted((t1, t2))
    try:
        _, rep_hi = degree_filter(cloud, epsilon=eps, tau=hi)
    except OutlierRemovalError:
        return
    _, rep_lo = degree_filter(cloud, epsilon=eps, tau=lo)
    for rep in (rep_lo, rep_hi):
        both = np.concatenate([rep.kept_indices, rep.removed_indices])
        np.testing.assert_array_equal(np.sort(both), np.arange(n))
        assert np.all(rep.degrees[rep.kept_indices] >= rep.tau)
        assert np.all(rep.degrees[rep.removed_indices] < rep.tau)
    assert set(rep_hi.kept_indices) <= set(rep_lo.kept_indices)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(0, 20), min_size=1, max_size=60), st.floats(0, 0.99))
def test_percentile_removal_count(values, pct):
    deg = np.asarray(values, dtype=float)
    tau = tau_from_percentile(deg, pct)
    target = int(np.ceil(round(pct * deg.size, 9)))
    removed = int(np.sum(deg < tau))
    # ties at the cut can only reduce the count
    assert removed <= target
    if len(np.unique(deg)) == deg.size:
        assert removed == min(target, deg.size)
