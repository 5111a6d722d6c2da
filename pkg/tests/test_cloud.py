import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from pcdenoise.cloud import CloudFormatError, PointCloud, read_cloud, write_cloud


def test_ascii_ply_three_vertices(tmp_path):
    path = tmp_path / "tri.ply"
    path.write_text(
        "ply\nformat ascii 1.0\ncomment made by hand\nelement vertex 3\n"
        "property float x\nproperty float y\nproperty float z\n"
        "element face 1\nproperty list uchar int vertex_indices\nend_header\n"
        "0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n"
    )
    cloud = read_cloud(path)
    np.testing.assert_array_equal(cloud.points, [[0, 0, 0], [1, 0, 0], [0, 1, 0]])


def test_xyz_text(tmp_path):
    path = tmp_path / "pts.xyz"
    path.write_text("# header comment\n1 2 3\n4 5 6\n")
    np.testing.assert_array_equal(read_cloud(path).points, [[1, 2, 3], [4, 5, 6]])


def test_ply_nan_names_vertex(tmp_path):
    path = tmp_path / "bad.ply"
    path.write_text(
        "ply\nformat ascii 1.0\nelement vertex 3\nproperty double x\nproperty double y\n"
        "property double z\nend_header\n0 0 0\n1 nan 0\n0 1 0\n"
    )
    with pytest.raises(CloudFormatError, match="vertex 1"):
        read_cloud(path)


def test_ply_missing_z_rejected(tmp_path):
    path = tmp_path / "xy.ply"
    path.write_text("ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\n"
                    "property float y\nend_header\n0 0\n")
    with pytest.raises(CloudFormatError, match="'z'"):
        read_cloud(path)


@pytest.mark.parametrize("header", [
    "ply\nformat ascii 1.0\nelement vertex x\nend_header\n",
    "ply\nformat weird 1.0\nend_header\n",
    "ply\nelement vertex 1\nproperty float x\n",
    "not a ply\n",
])
def test_malformed_header(tmp_path, header):
    path = tmp_path / "m.ply"
    path.write_text(header)
    with pytest.raises(CloudFormatError):
        read_cloud(path)


def test_unreadable_file(tmp_path):
    with pytest.raises(OSError):
        read_cloud(tmp_path / "missing.ply")


def test_binary_ply_roundtrip_bit_identical(tmp_path, rng):
    cloud = PointCloud(rng.normal(size=(1000, 3)) * 123.456)
    path = tmp_path / "c.ply"
    write_cloud(cloud, path, binary=True)
    assert read_cloud(path).points.tobytes() == cloud.points.tobytes()


def test_ascii_xyz_roundtrip(tmp_path, rng):
    cloud = PointCloud(rng.normal(size=(500, 3)))
    path = tmp_path / "c.xyz"
    write_cloud(cloud, path)
    back = read_cloud(path).points
    np.testing.assert_allclose(back, cloud.points, rtol=1e-9, atol=0)


def test_ascii_ply_roundtrip_with_frames_and_colors(tmp_path, rng):
    n = 50
    cloud = PointCloud(rng.random((n, 3)), frame_ids=np.repeat([0, 1], n // 2),
                       attributes={"red": rng.integers(0, 255, n).astype(np.uint8)})
    for binary in (False, True):
        path = tmp_path / f"c{binary}.ply"
        write_cloud(cloud, path, binary=binary)
        back = read_cloud(path)
        np.testing.assert_array_equal(back.points, cloud.points)
        np.testing.assert_array_equal(back.frame_ids, cloud.frame_ids)
        np.testing.assert_array_equal(back.attributes["red"], cloud.attributes["red"])
        assert back.attributes["red"].dtype == np.uint8


def test_binary_float32_ply(tmp_path):
    pts = np.array([[0.5, 1.5, -2.0], [3.0, 4.0, 5.0]], dtype="<f4")
    rec = np.zeros(2, dtype=[("x", "<f4"), ("y", "<f4"), ("z", "<f4"), ("nx", "<f4")])
    rec["x"], rec["y"], rec["z"] = pts.T
    path = tmp_path / "f.ply"
    with open(path, "wb") as fh:
        fh.write(b"ply\nformat binary_little_endian 1.0\nelement vertex 2\nproperty float x\n"
                 b"property float y\nproperty float z\nproperty float nx\nend_header\n")
        fh.write(rec.tobytes())
    cloud = read_cloud(path)
    np.testing.assert_array_equal(cloud.points, pts.astype(float))
    assert "nx" in cloud.attributes


def test_empty_cloud_write_rejected(tmp_path):
    with pytest.raises(ValueError):
        write_cloud(PointCloud(np.zeros((0, 3))), tmp_path / "e.ply")


def test_pointcloud_invariants():
    with pytest.raises(ValueError):
        PointCloud([[0, 0, np.inf]])
    with pytest.raises(ValueError):
        PointCloud(np.zeros((3, 3)), frame_ids=[0, 1])
    with pytest.raises(ValueError):
        PointCloud(np.zeros((2, 2)))
    c = PointCloud(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        c.points[0, 0] = 1.0


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 40), st.just(3)),
              elements=st.floats(-1e6, 1e6, allow_nan=False)),
       st.data())
def test_select_reproduces_subset(points, data):
    cloud = PointCloud(points)
    idx = data.draw(st.lists(st.integers(0, len(points) - 1), unique=True).map(sorted))
    sub = cloud.select(idx)
    np.testing.assert_array_equal(sub.points, points[idx])


@settings(max_examples=20, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 30), st.just(3)),
              elements=st.floats(-1e9, 1e9, allow_nan=False)))
def test_roundtrip_property(tmp_path_factory, points):
    d = tmp_path_factory.mktemp("rt")
    cloud = PointCloud(points)
    for name in ("a.ply", "a.xyz"):
        write_cloud(cloud, d / name)
        np.testing.assert_array_equal(read_cloud(d / name).points, cloud.points)
