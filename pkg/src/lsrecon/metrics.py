"""Voxelization, IoU and Chamfer distance."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .distance import nearest_points
from .errors import DomainError
from .grid import GridSpec, ScalarField, sample_trilinear
from .surface import TriMesh

DEFAULT_IOU_RES = 128
DOMAIN_LOWER = (-1.0, -1.0, -1.0)
DOMAIN_UPPER = (1.0, 1.0, 1.0)
JITTER_SEED = 20190401
_MAX_JITTER_TRIES = 16


@dataclass(frozen=True)
class OccupancyGrid:
    """Boolean voxels; ``spec`` nodes are the voxel centres."""

    spec: GridSpec
    bits: np.ndarray = field(repr=False)

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=bool)
        if bits.shape != self.spec.dims:
            raise DomainError(f"occupancy shape {bits.shape} does not match grid {self.spec.dims}")
        object.__setattr__(self, "bits", bits)

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.bits))

    @property
    def fraction(self) -> float:
        return self.count / self.bits.size

    @property
    def volume(self) -> float:
        return self.count * self.spec.cell_volume


def voxel_grid(res: int, lower=DOMAIN_LOWER, upper=DOMAIN_UPPER) -> GridSpec:
    """Centres of a ``res^3`` partition of the cube ``[lower, upper]``."""
    if res < 2:
        raise DomainError(f"voxelization resolution must be >= 2, got {res}")
    lower = np.broadcast_to(np.asarray(lower, dtype=float), (3,))
    extent = np.broadcast_to(np.asarray(upper, dtype=float), (3,)) - lower
    if not np.allclose(extent, extent[0]) or not extent[0] > 0:
        raise DomainError("voxelization box must be a cube")
    size = extent[0] / res
    return GridSpec((res,) * 3, tuple(lower + 0.5 * size), size)


def voxelize_field(phi: ScalarField, res: int = DEFAULT_IOU_RES, lower=DOMAIN_LOWER, upper=DOMAIN_UPPER) -> OccupancyGrid:
    """Voxel is occupied when trilinear ``phi`` at its centre is ``>= 0``.

    Centres outside phi's own node box take the value of the nearest
    boundary point.
    """
    spec = voxel_grid(res, lower, upper)
    pts = np.clip(spec.points().reshape(-1, 3), phi.spec.lower, phi.spec.upper)
    values = sample_trilinear(phi, pts)
    return OccupancyGrid(spec, (values >= 0.0).reshape(spec.dims))


def _cross2(ax, ay, bx, by):
    return ax * by - ay * bx


def _ray_hits(tri, y, z):
    """x of every crossing between +x rays at ``(y[n], z[n])`` and triangle ``tri[n]``.

    Returns (hit mask, x, degenerate mask). A ray is degenerate when it passes
    exactly through a triangle edge or vertex.
    """
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    e_a = _cross2(c[:, 1] - b[:, 1], c[:, 2] - b[:, 2], y - b[:, 1], z - b[:, 2])
    e_b = _cross2(a[:, 1] - c[:, 1], a[:, 2] - c[:, 2], y - c[:, 1], z - c[:, 2])
    e_c = _cross2(b[:, 1] - a[:, 1], b[:, 2] - a[:, 2], y - a[:, 1], z - a[:, 2])
    total = e_a + e_b + e_c
    flat = total == 0.0
    pos = (e_a >= 0) & (e_b >= 0) & (e_c >= 0)
    neg = (e_a <= 0) & (e_b <= 0) & (e_c <= 0)
    inside = (pos | neg) & ~flat
    on_edge = inside & ((e_a == 0) | (e_b == 0) | (e_c == 0))
    grazing = flat & (pos | neg)
    safe = np.where(flat, 1.0, total)
    x = (e_a * a[:, 0] + e_b * b[:, 0] + e_c * c[:, 0]) / safe
    return inside & ~on_edge, x, on_edge | grazing


def _candidates(tri, ys, zs):
    """(triangle, j, k) triples whose yz bounding box contains the ray origin."""
    lo = tri.min(axis=1)
    hi = tri.max(axis=1)
    j0 = np.searchsorted(ys, lo[:, 1], "left")
    j1 = np.searchsorted(ys, hi[:, 1], "right")
    k0 = np.searchsorted(zs, lo[:, 2], "left")
    k1 = np.searchsorted(zs, hi[:, 2], "right")
    nj = np.maximum(j1 - j0, 0)
    nk = np.maximum(k1 - k0, 0)
    n = nj * nk
    t = np.repeat(np.arange(len(tri)), n)
    local = np.arange(n.sum()) - np.repeat(np.cumsum(n) - n, n)
    j = j0[t] + local // nk[t]
    k = k0[t] + local % nk[t]
    return t, j, k


def voxelize_mesh(mesh: TriMesh, res: int = DEFAULT_IOU_RES, lower=DOMAIN_LOWER, upper=DOMAIN_UPPER) -> OccupancyGrid:
    """Inside test by parity of crossings along +x from each voxel centre.

    Rays that hit an edge or vertex exactly are re-cast from a slightly
    jittered origin drawn from a fixed seed, so results are deterministic.
    """
    spec = voxel_grid(res, lower, upper)
    if len(mesh) == 0:
        return OccupancyGrid(spec, np.zeros(spec.dims, dtype=bool))
    if not mesh.is_watertight():
        raise DomainError("mesh is not watertight; inside test is undefined")
    xs, ys, zs = spec.axes()
    tri = mesh.vertices[mesh.triangles]

    t, j, k = _candidates(tri, ys, zs)
    hit, x, degenerate = _ray_hits(tri[t], ys[j], zs[k])
    crossings = np.zeros((res, res, res + 1), dtype=np.int64)
    np.add.at(crossings, (j[hit], k[hit], np.searchsorted(xs, x[hit], "left")), 1)

    bad_rows = np.unique(np.stack([j[degenerate], k[degenerate]], axis=1), axis=0)
    rng = np.random.default_rng(JITTER_SEED)
    for jj, kk in bad_rows:
        crossings[jj, kk] = _jittered_row(tri, xs, ys[jj], zs[kk], spec.spacing, rng)

    # number of crossings strictly beyond each node, from the far end inward
    beyond = np.cumsum(crossings[:, :, ::-1], axis=2)[:, :, ::-1][:, :, 1:]
    bits = (beyond % 2 == 1).transpose(2, 0, 1)
    return OccupancyGrid(spec, bits)


def _jittered_row(tri, xs, y, z, h, rng):
    for _ in range(_MAX_JITTER_TRIES):
        dy, dz = rng.uniform(-0.5, 0.5, size=2) * 1e-3 * h
        hit, x, degenerate = _ray_hits(tri, np.full(len(tri), y + dy), np.full(len(tri), z + dz))
        if not degenerate.any():
            return np.bincount(np.searchsorted(xs, x[hit], "left"), minlength=len(xs) + 1)
    raise DomainError("could not find a non-degenerate ray")


def iou(a: OccupancyGrid, b: OccupancyGrid) -> float:
    if a.bits.shape != b.bits.shape:
        raise DomainError(f"occupancy shapes differ: {a.bits.shape} vs {b.bits.shape}")
    union = np.count_nonzero(a.bits | b.bits)
    if union == 0:
        return 1.0
    return np.count_nonzero(a.bits & b.bits) / union


def _as_points(p):
    pts = np.asarray(getattr(p, "points", p), dtype=np.float64).reshape(-1, 3)
    if len(pts) == 0:
        raise DomainError("Chamfer distance needs two nonempty point sets")
    return pts


def chamfer(p1, p2) -> float:
    """Symmetric mean nearest-neighbour Euclidean distance (not squared)."""
    a = _as_points(p1)
    b = _as_points(p2)
    d_ab, _ = nearest_points(a, b)
    d_ba, _ = nearest_points(b, a)
    return float(np.mean(d_ab)) + float(np.mean(d_ba))
