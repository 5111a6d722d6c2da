"""Point cloud container and PLY / XYZ file I/O."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = ["PointCloud", "CloudFormatError", "read_cloud", "write_cloud"]

# PLY property name that carries the per-point frame index on disk
FRAME_PROPERTY = "frame"

_PLY_TYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}
_PLY_NAMES = {"i1": "char", "u1": "uchar", "i2": "short", "u2": "ushort",
              "i4": "int", "u4": "uint", "f4": "float", "f8": "double"}


class CloudFormatError(ValueError):
    """Raised for unreadable, malformed or non-finite point cloud files."""


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Ordered 3D positions with an optional frame index per point.

    ``attributes`` holds extra per-point PLY properties (colors, normals, ...)
    that are carried along untouched and re-emitted by :func:`write_cloud`.
    """

    points: np.ndarray
    frame_ids: np.ndarray | None = None
    attributes: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64, copy=True)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"points must have shape (n, 3), got {pts.shape}")
        bad = ~np.isfinite(pts).all(axis=1)
        if bad.any():
            raise ValueError(f"non-finite coordinate at point {int(np.argmax(bad))}")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

        if self.frame_ids is not None:
            fr = np.array(self.frame_ids, copy=True)
            if fr.shape != (pts.shape[0],):
                raise ValueError("frame_ids length must equal the number of points")
            if not np.issubdtype(fr.dtype, np.integer):
                if not np.all(fr == np.round(fr)):
                    raise ValueError("frame_ids must be integers")
            fr = fr.astype(np.int64)
            if (fr < 0).any():
                raise ValueError("frame_ids must be non-negative")
            fr.flags.writeable = False
            object.__setattr__(self, "frame_ids", fr)

        attrs = {}
        for name, arr in self.attributes.items():
            arr = np.array(arr, copy=True)
            if arr.shape[0] != pts.shape[0]:
                raise ValueError(f"attribute {name!r} has wrong length")
            arr.flags.writeable = False
            attrs[name] = arr
        object.__setattr__(self, "attributes", attrs)

    def __len__(self):
        return self.points.shape[0]

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    def select(self, indices) -> PointCloud:
        """Sub-cloud made of ``indices`` (in the given order)."""
        idx = np.asarray(indices, dtype=np.intp)
        return PointCloud(
            self.points[idx],
            None if self.frame_ids is None else self.frame_ids[idx],
            {k: v[idx] for k, v in self.attributes.items()},
        )

    def with_points(self, points) -> PointCloud:
        """Same cloud (frames, attributes) with moved positions."""
        return PointCloud(points, self.frame_ids, self.attributes)


def _infer_format(path, fmt):
    if fmt not in (None, "auto"):
        if fmt not in ("ply", "xyz"):
            raise ValueError(f"unknown format {fmt!r}")
        return fmt
    ext = Path(path).suffix.lower()
    if ext == ".ply":
        return "ply"
    if ext in (".xyz", ".txt", ".pts"):
        return "xyz"
    raise ValueError(f"cannot infer cloud format from extension {ext!r}")


def _check_finite(points, what):
    bad = ~np.isfinite(points).all(axis=1)
    if bad.any():
        raise CloudFormatError(f"{what}: non-finite coordinate in vertex {int(np.argmax(bad))}")


# --------------------------------------------------------------------------
# PLY
# --------------------------------------------------------------------------

def _parse_ply_header(fh, path):
    magic = fh.readline()
    if magic.strip() != b"ply":
        raise CloudFormatError(f"{path}: not a PLY file")
    fmt = None
    elements = []  # [name, count, [(prop, dtype or ('list', cnt, item))]]
    while True:
        raw = fh.readline()
        if not raw:
            raise CloudFormatError(f"{path}: header has no end_header")
        line = raw.decode("ascii", errors="replace").strip()
        if not line or line.startswith(("comment", "obj_info")):
            continue
        tok = line.split()
        try:
            if tok[0] == "format":
                fmt = tok[1]
                if fmt not in ("ascii", "binary_little_endian", "binary_big_endian"):
                    raise CloudFormatError(f"{path}: unsupported PLY format {fmt!r}")
            elif tok[0] == "element":
                elements.append([tok[1], int(tok[2]), []])
            elif tok[0] == "property":
                if not elements:
                    raise CloudFormatError(f"{path}: property before any element")
                if tok[1] == "list":
                    elements[-1][2].append((tok[4], ("list", _PLY_TYPES[tok[2]], _PLY_TYPES[tok[3]])))
                else:
                    elements[-1][2].append((tok[2], _PLY_TYPES[tok[1]]))
            elif tok[0] == "end_header":
                break
            else:
                raise CloudFormatError(f"{path}: unexpected header line {line!r}")
        except (IndexError, KeyError, ValueError) as exc:
            if isinstance(exc, CloudFormatError):
                raise
            raise CloudFormatError(f"{path}: malformed header line {line!r}") from exc
    if fmt is None:
        raise CloudFormatError(f"{path}: missing format line")
    return fmt, elements


def _read_ply(path):
    with open(path, "rb") as fh:
        fmt, elements = _parse_ply_header(fh, path)
        names = [e[0] for e in elements]
        if "vertex" not in names:
            raise CloudFormatError(f"{path}: no vertex element")
        vertex = elements[names.index("vertex")]
        _, count, props = vertex
        prop_names = [p[0] for p in props]
        for axis in "xyz":
            if axis not in prop_names:
                raise CloudFormatError(f"{path}: vertex element lacks property {axis!r}")

        if fmt == "ascii":
            data = _read_ply_ascii_vertices(fh, elements, path)
        else:
            data = _read_ply_binary_vertices(fh, elements, fmt, path)

    points = np.column_stack([data[a].astype(np.float64) for a in "xyz"])
    _check_finite(points, str(path))
    frame_ids = None
    attributes = {}
    for name, kind in props:
        if name in ("x", "y", "z") or isinstance(kind, tuple):
            continue
        if name == FRAME_PROPERTY:
            frame_ids = data[name]
        else:
            attributes[name] = data[name]
    return PointCloud(points, frame_ids, attributes)


def _read_ply_ascii_vertices(fh, elements, path):
    data = None
    for name, count, props in elements:
        rows = []
        for r in range(count):
            raw = fh.readline()
            if not raw:
                raise CloudFormatError(f"{path}: truncated {name} data at record {r}")
            if name != "vertex":
                continue
            tok = raw.split()
            vals = []
            pos = 0
            try:
                for _, kind in props:
                    if isinstance(kind, tuple):
                        pos += 1 + int(tok[pos])
                        vals.append(0)
                    else:
                        vals.append(float(tok[pos]))
                        pos += 1
            except (IndexError, ValueError) as exc:
                raise CloudFormatError(f"{path}: malformed vertex record {r}") from exc
            rows.append(vals)
        if name == "vertex":
            arr = np.array(rows, dtype=np.float64).reshape(count, len(props))
            data = {}
            for c, (pname, kind) in enumerate(props):
                if isinstance(kind, tuple):
                    continue
                data[pname] = arr[:, c].astype(kind)
            break
    return data


def _read_ply_binary_vertices(fh, elements, fmt, path):
    order = "<" if fmt == "binary_little_endian" else ">"
    for name, count, props in elements:
        if any(isinstance(kind, tuple) for _, kind in props):
            if name == "vertex":
                raise CloudFormatError(f"{path}: list properties on binary vertices are not supported")
            raise CloudFormatError(f"{path}: cannot skip list element {name!r} preceding vertices")
        dtype = np.dtype([(pname, order + kind) for pname, kind in props])
        buf = fh.read(dtype.itemsize * count)
        if len(buf) != dtype.itemsize * count:
            raise CloudFormatError(f"{path}: truncated {name} data")
        if name == "vertex":
            arr = np.frombuffer(buf, dtype=dtype, count=count)
            return {pname: arr[pname].astype(kind) for pname, kind in props}
    raise CloudFormatError(f"{path}: no vertex element")  # pragma: no cover


def _write_ply(cloud, path, binary):
    cols = [("x", cloud.points[:, 0]), ("y", cloud.points[:, 1]), ("z", cloud.points[:, 2])]
    if cloud.frame_ids is not None:
        cols.append((FRAME_PROPERTY, cloud.frame_ids.astype(np.int32)))
    for name, arr in cloud.attributes.items():
        if arr.ndim != 1 or arr.dtype.str[1:] not in _PLY_NAMES:
            continue  # not representable as a scalar PLY property
        cols.append((name, arr))
    kinds = [arr.dtype.str[1:] for _, arr in cols]

    header = ["ply", "format %s 1.0" % ("binary_little_endian" if binary else "ascii"),
              f"element vertex {cloud.n_points}"]
    header += [f"property {_PLY_NAMES[k]} {name}" for (name, _), k in zip(cols, kinds)]
    header.append("end_header")

    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        if binary:
            dtype = np.dtype([(name, "<" + k) for (name, _), k in zip(cols, kinds)])
            rec = np.empty(cloud.n_points, dtype=dtype)
            for name, arr in cols:
                rec[name] = arr
            fh.write(rec.tobytes())
        else:
            fmts = ["%.17g" if k.startswith("f") else "%d" for k in kinds]
            table = np.empty((cloud.n_points, len(cols)), dtype=object)
            for c, (_, arr) in enumerate(cols):
                table[:, c] = arr.tolist()
            np.savetxt(fh, table, fmt=fmts, delimiter=" ")


# --------------------------------------------------------------------------
# XYZ
# --------------------------------------------------------------------------

def _read_xyz(path):
    rows = []
    with open(path, "r") as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            tok = s.split()
            if len(tok) < 3:
                raise CloudFormatError(f"{path}:{lineno}: expected 3 fields, got {len(tok)}")
            try:
                rows.append([float(t) for t in tok[:3]])
            except ValueError as exc:
                raise CloudFormatError(f"{path}:{lineno}: {exc}") from exc
    points = np.array(rows, dtype=np.float64).reshape(-1, 3)
    _check_finite(points, str(path))
    return PointCloud(points)


def _write_xyz(cloud, path):
    np.savetxt(path, cloud.points, fmt="%.17g")


# --------------------------------------------------------------------------
# public API
# --------------------------------------------------------------------------

def read_cloud(path, format="auto") -> PointCloud:
    """Read a PLY or XYZ file.

    Args:
        path: file to read.
        format: ``"ply"``, ``"xyz"`` or ``"auto"`` (from the file extension).

    Raises:
        CloudFormatError: malformed file, missing x/y/z, or a non-finite
            coordinate (the message names the vertex index).
        OSError: unreadable file.
    """
    fmt = _infer_format(path, format)
    if not os.path.isfile(path):
        raise FileNotFoundError(path)
    return _read_ply(path) if fmt == "ply" else _read_xyz(path)


def write_cloud(cloud: PointCloud, path, format="auto", binary=True):
    """Write ``cloud`` to ``path``.

    PLY output stores coordinates as doubles, so a binary round trip is
    bit-exact; ASCII formats print 17 significant digits.
    """
    if cloud.n_points == 0:
        raise ValueError("refusing to write an empty point cloud")
    fmt = _infer_format(path, format)
    if fmt == "ply":
        _write_ply(cloud, path, binary)
    else:
        _write_xyz(cloud, path)
