"""Zero level set extraction, triangle meshes and surface sampling."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _mc_tables
from .distance import Box, OrientedPointCloud
from .errors import DomainError
from .grid import GridSpec, ScalarField

DEGENERATE_AREA = 1e-12
# edge parameters this close to an endpoint are snapped onto the node
_T_SNAP = 1e-7


@dataclass(frozen=True)
class TriMesh:
    """Indexed triangle mesh; triangles wind counterclockwise seen from outside."""

    vertices: np.ndarray = field(repr=False)
    triangles: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        t = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if len(t) and (t.min() < 0 or t.max() >= len(v)):
            raise DomainError("triangle index out of range")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)

    @classmethod
    def empty(cls) -> "TriMesh":
        return cls(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))

    def __len__(self):
        return len(self.triangles)

    def corners(self):
        v = self.vertices[self.triangles]
        return v[:, 0], v[:, 1], v[:, 2]

    def face_cross(self) -> np.ndarray:
        a, b, c = self.corners()
        return np.cross(b - a, c - a)

    def face_areas(self) -> np.ndarray:
        return 0.5 * np.linalg.norm(self.face_cross(), axis=1)

    def face_normals(self) -> np.ndarray:
        cr = self.face_cross()
        return cr / np.linalg.norm(cr, axis=1, keepdims=True)

    def edge_degrees(self) -> np.ndarray:
        """Number of triangles sharing each undirected edge."""
        t = self.triangles
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        e.sort(axis=1)
        _, counts = np.unique(e, axis=0, return_counts=True)
        return counts

    def is_watertight(self) -> bool:
        if len(self.triangles) == 0:
            return False
        return bool(np.all(self.edge_degrees() == 2))

    def flipped(self) -> "TriMesh":
        return TriMesh(self.vertices, self.triangles[:, ::-1])


_CORNERS = np.array(_mc_tables.CORNERS, dtype=np.int64)
_EDGES = np.array(_mc_tables.EDGES, dtype=np.int64)
_EDGE_LOW = np.minimum(_CORNERS[_EDGES[:, 0]], _CORNERS[_EDGES[:, 1]])
_EDGE_AXIS = np.argmax(np.abs(_CORNERS[_EDGES[:, 1]] - _CORNERS[_EDGES[:, 0]]), axis=1)
_TABLE = np.full((256, 15), -1, dtype=np.int64)
for _case, _row in enumerate(_mc_tables.TRIANGLES):
    _TABLE[_case, : len(_row)] = _row
_TRI_COUNT = (_TABLE >= 0).sum(axis=1) // 3


def marching_cubes(phi: ScalarField, iso: float = 0.0) -> TriMesh:
    """Table-driven extraction of ``{phi == iso}``.

    Vertices are shared through a global edge key, so a closed level set
    gives a watertight mesh. Triangles face the ``phi < iso`` side.
    """
    spec = phi.spec
    v = phi.values
    nx, ny, nz = spec.dims
    below = v < iso

    case = np.zeros((nx - 1, ny - 1, nz - 1), dtype=np.int64)
    for bit, (a, b, c) in enumerate(_CORNERS):
        case |= below[a : nx - 1 + a, b : ny - 1 + b, c : nz - 1 + c].astype(np.int64) << bit
    cells = np.nonzero(_TRI_COUNT[case] > 0)
    if len(cells[0]) == 0:
        return TriMesh.empty()
    cell_idx = np.stack(cells, axis=1)
    rows = _TABLE[case[cells]]
    tri_mask = rows.reshape(-1, 5, 3)[:, :, 0] >= 0
    cell_of_tri = np.repeat(np.arange(len(cell_idx)), tri_mask.sum(axis=1))
    tri_edges = rows.reshape(-1, 5, 3)[tri_mask]

    # global key of each edge: (flat index of its lower node) * 3 + axis
    low = cell_idx[cell_of_tri][:, None, :] + _EDGE_LOW[tri_edges]
    axis = _EDGE_AXIS[tri_edges]
    flat_low = (low[..., 0] * ny + low[..., 1]) * nz + low[..., 2]
    keys = flat_low * 3 + axis
    ukeys, inverse = np.unique(keys.ravel(), return_inverse=True)

    ax = ukeys % 3
    base = ukeys // 3
    i0 = np.stack(np.unravel_index(base, (nx, ny, nz)), axis=1)
    i1 = i0 + np.eye(3, dtype=np.int64)[ax]
    v0 = v[i0[:, 0], i0[:, 1], i0[:, 2]]
    v1 = v[i1[:, 0], i1[:, 1], i1[:, 2]]
    t = (iso - v0) / (v1 - v0)
    t = np.where(t < _T_SNAP, 0.0, np.where(t > 1.0 - _T_SNAP, 1.0, t))
    p0 = spec.lower + spec.spacing * i0
    p1 = spec.lower + spec.spacing * i1
    pos = p0 + t[:, None] * (p1 - p0)
    pos = np.where((t == 1.0)[:, None], p1, pos)

    # merge vertices that landed on the same node
    verts, remap = np.unique(pos, axis=0, return_inverse=True)
    tris = remap.reshape(-1)[inverse].reshape(-1, 3)

    distinct = (tris[:, 0] != tris[:, 1]) & (tris[:, 1] != tris[:, 2]) & (tris[:, 0] != tris[:, 2])
    tris = tris[distinct]
    mesh = TriMesh(verts, tris)
    mesh = TriMesh(verts, tris[mesh.face_areas() >= DEGENERATE_AREA])
    return _compact(mesh)


def _compact(mesh: TriMesh) -> TriMesh:
    used, tris = np.unique(mesh.triangles, return_inverse=True)
    return TriMesh(mesh.vertices[used], tris.reshape(-1, 3))


class MeshMeasures(NamedTuple):
    area: float
    volume: float
    watertight: bool


def mesh_area_volume(mesh: TriMesh) -> MeshMeasures:
    """Total area and enclosed volume (signed tetrahedra about the origin).

    ``watertight`` is False when some edge is not shared by exactly two
    triangles; the volume is then not meaningful.
    """
    if len(mesh) == 0:
        return MeshMeasures(0.0, 0.0, False)
    a, b, c = mesh.corners()
    area = float(np.sum(mesh.face_areas()))
    volume = abs(float(np.sum(np.einsum("ij,ij->i", a, np.cross(b, c)))) / 6.0)
    return MeshMeasures(area, volume, mesh.is_watertight())


def sample_mesh_surface(mesh: TriMesh, count: int, seed: int = 0) -> OrientedPointCloud:
    if len(mesh) == 0:
        raise DomainError("cannot sample an empty mesh")
    if count < 1:
        raise DomainError("count must be >= 1")
    rng = np.random.default_rng(seed)
    areas = mesh.face_areas()
    face = rng.choice(len(areas), size=int(count), p=areas / areas.sum())
    r1 = np.sqrt(rng.uniform(size=count))[:, None]
    r2 = rng.uniform(size=count)[:, None]
    a, b, c = (x[face] for x in mesh.corners())
    points = (1.0 - r1) * a + r1 * (1.0 - r2) * b + r1 * r2 * c
    return OrientedPointCloud(points, mesh.face_normals()[face])


def box_mesh(box: Box) -> TriMesh:
    c = np.asarray(box.center)
    he = np.asarray(box.half_extents)
    verts = c + he * (2.0 * _CORNERS - 1.0)
    # outward-facing quads over the corner numbering above
    quads = [(0, 3, 2, 1), (4, 5, 6, 7), (0, 1, 5, 4), (3, 7, 6, 2), (0, 4, 7, 3), (1, 2, 6, 5)]
    tris = [t for a, b, cc, d in quads for t in ((a, b, cc), (a, cc, d))]
    return TriMesh(verts, tris)


def shape_mesh(shape, res: int = 128) -> TriMesh:
    """Ground-truth mesh for an analytic shape (exact for boxes)."""
    if isinstance(shape, Box):
        return box_mesh(shape)
    spec = GridSpec.cube(res)
    return marching_cubes(ScalarField(spec, shape.sdf(spec.points())))
