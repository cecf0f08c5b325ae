"""Readers and writers for meshes (OBJ), point clouds, fields and config files.

Field files (little endian)::

    b"LSF1" | nx ny nz (uint32) | origin (3 x float64) | spacing (float64)
    | nx*ny*nz float32 values, x fastest
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .distance import OrientedPointCloud
from .errors import DomainError, FormatError
from .grid import GridSpec, ScalarField
from .surface import TriMesh

FIELD_MAGIC = b"LSF1"
_HEADER = struct.Struct("<4s3I3dd")
NORMAL_READ_TOL = 1e-3


def _records(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if line:
                yield lineno, line


# --- OBJ -------------------------------------------------------------------


def read_obj(path) -> TriMesh:
    """``v`` and ``f`` records only; polygons are fan-triangulated."""
    vertices = []
    triangles = []
    for lineno, line in _records(path):
        tag, *rest = line.split()
        if tag == "v":
            if len(rest) < 3:
                raise FormatError("vertex needs three coordinates", lineno)
            try:
                vertices.append([float(x) for x in rest[:3]])
            except ValueError as exc:
                raise FormatError(f"bad vertex coordinate ({exc})", lineno) from None
        elif tag == "f":
            if len(rest) < 3:
                raise FormatError("face needs at least three vertices", lineno)
            idx = []
            for tok in rest:
                try:
                    i = int(tok.split("/", 1)[0])
                except ValueError:
                    raise FormatError(f"bad face index {tok!r}", lineno) from None
                i = i - 1 if i > 0 else len(vertices) + i
                if i < 0 or i >= len(vertices):
                    raise FormatError(f"face index {tok!r} out of range", lineno)
                idx.append(i)
            triangles.extend((idx[0], idx[k], idx[k + 1]) for k in range(1, len(idx) - 1))
    return TriMesh(np.array(vertices, dtype=float).reshape(-1, 3), np.array(triangles, dtype=np.int64).reshape(-1, 3))


def write_obj(mesh: TriMesh, path) -> None:
    lines = [f"v {x:.6g} {y:.6g} {z:.6g}\n" for x, y, z in mesh.vertices]
    lines += [f"f {a + 1} {b + 1} {c + 1}\n" for a, b, c in mesh.triangles]
    Path(path).write_text("".join(lines), encoding="utf-8")


# --- point clouds ------------------------------------------------------------


def read_cloud(path) -> OrientedPointCloud:
    """Lines of ``x y z nx ny nz``; near-unit normals are renormalized."""
    points = []
    normals = []
    for lineno, line in _records(path):
        parts = line.split()
        if len(parts) != 6:
            raise FormatError(f"expected 6 values, got {len(parts)}", lineno)
        try:
            vals = [float(x) for x in parts]
        except ValueError as exc:
            raise FormatError(str(exc), lineno) from None
        n = np.array(vals[3:])
        length = np.linalg.norm(n)
        if not abs(length - 1.0) <= NORMAL_READ_TOL:
            raise FormatError(f"normal has length {length:.6g}, not unit", lineno)
        points.append(vals[:3])
        normals.append(n / length)
    if not points:
        raise FormatError(f"{path}: point cloud is empty")
    try:
        return OrientedPointCloud(np.array(points), np.array(normals))
    except DomainError as exc:
        raise FormatError(f"{path}: {exc}") from None


def write_cloud(cloud: OrientedPointCloud, path) -> None:
    rows = np.hstack([cloud.points, cloud.normals])
    Path(path).write_text("".join(" ".join(f"{v:.17g}" for v in row) + "\n" for row in rows), encoding="utf-8")


# --- fields -------------------------------------------------------------------


def write_field(phi: ScalarField, path) -> None:
    spec = phi.spec
    header = _HEADER.pack(FIELD_MAGIC, *spec.dims, *spec.origin, spec.spacing)
    payload = phi.flat().astype("<f4").tobytes()
    Path(path).write_bytes(header + payload)


def read_field(path) -> ScalarField:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise FormatError(f"{path}: truncated header: expected {_HEADER.size} bytes, got {len(data)}")
    magic, nx, ny, nz, ox, oy, oz, h = _HEADER.unpack_from(data)
    if magic != FIELD_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {FIELD_MAGIC!r}")
    expected = _HEADER.size + 4 * nx * ny * nz
    if len(data) != expected:
        raise FormatError(f"{path}: expected {expected} bytes for {nx}x{ny}x{nz} field, got {len(data)}")
    try:
        spec = GridSpec((nx, ny, nz), (ox, oy, oz), h)
        values = np.frombuffer(data, dtype="<f4", offset=_HEADER.size).astype(np.float64)
        return ScalarField.from_flat(spec, values)
    except DomainError as exc:
        raise FormatError(f"{path}: {exc}") from None


# --- config -----------------------------------------------------------------


def read_config(path) -> dict[str, str]:
    """Flat ``key = value`` file; keys use CLI spelling with or without dashes."""
    out = {}
    for lineno, line in _records(path):
        if "=" not in line:
            raise FormatError("expected 'key = value'", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise FormatError("empty key", lineno)
        out[key.lstrip("-").replace("-", "_")] = value
    return out
