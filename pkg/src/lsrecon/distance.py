"""Target shapes: oriented point clouds, distance fields, analytic SDFs.

Signed distances follow the inside-positive convention throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import DomainError
from .grid import GridSpec, ScalarField

NORMAL_TOL = 1e-6
DOMAIN = 1.0


def _frozen(a, dtype=np.float64):
    a = np.array(a, dtype=dtype, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class OrientedPointCloud:
    points: np.ndarray = field(repr=False)
    normals: np.ndarray = field(repr=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        nrm = np.asarray(self.normals, dtype=np.float64).reshape(-1, 3)
        if len(pts) == 0:
            raise DomainError("point cloud is empty")
        if len(pts) != len(nrm):
            raise DomainError(f"{len(pts)} points but {len(nrm)} normals")
        if not (np.all(np.isfinite(pts)) and np.all(np.isfinite(nrm))):
            raise DomainError("point cloud contains NaN or Inf")
        if np.any(np.abs(pts) > DOMAIN):
            raise DomainError("cloud points must lie inside [-1, 1]^3")
        bad = np.abs(np.linalg.norm(nrm, axis=1) - 1.0) > NORMAL_TOL
        if np.any(bad):
            raise DomainError(f"normal {int(np.argmax(bad))} is not unit length")
        object.__setattr__(self, "points", _frozen(pts))
        object.__setattr__(self, "normals", _frozen(nrm))

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class DistanceField:
    """Unsigned distance to the cloud plus the index of the closest sample."""

    d: ScalarField
    nearest: np.ndarray = field(repr=False)
    normals: np.ndarray = field(repr=False)

    @property
    def spec(self) -> GridSpec:
        return self.d.spec


def _dist(a, b):
    diff = a - b
    return np.sqrt(np.sum(diff * diff, axis=-1))


def nearest_points(queries: np.ndarray, points: np.ndarray, tree: cKDTree | None = None):
    """Exact nearest sample per query, ties going to the smallest index.

    Distances are recomputed with the same float expression a brute-force
    scan would use, so results match such a scan bit for bit.
    """
    queries = np.asarray(queries, dtype=np.float64).reshape(-1, 3)
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(points) == 0:
        raise DomainError("cannot query an empty point set")
    if tree is None:
        tree = cKDTree(points)
    k = min(2, len(points))
    kd_d, kd_i = tree.query(queries, k=k)
    if k == 1:
        return _dist(queries, points[kd_i]), kd_i.astype(np.int64)
    idx = kd_i[:, 0].astype(np.int64)
    gap = kd_d[:, 1] - kd_d[:, 0]
    near_tie = np.nonzero(gap <= 1e-9 * (1.0 + kd_d[:, 0]))[0]
    if len(near_tie):
        radii = kd_d[near_tie, 0] * (1.0 + 1e-9) + 1e-12
        for q, cand in zip(near_tie, tree.query_ball_point(queries[near_tie], radii)):
            cand = np.sort(np.asarray(cand, dtype=np.int64))
            cd = _dist(queries[q], points[cand])
            idx[q] = cand[int(np.argmin(cd))]
    return _dist(queries, points[idx]), idx


def build_distance_field(cloud: OrientedPointCloud, spec: GridSpec) -> DistanceField:
    if cloud is None or len(cloud) == 0:
        raise DomainError("cannot build a distance field from an empty cloud")
    d, idx = nearest_points(spec.points().reshape(-1, 3), cloud.points)
    nearest = _frozen(idx.reshape(spec.dims), dtype=np.int64)
    normals = _frozen(cloud.normals[nearest])
    return DistanceField(ScalarField(spec, d.reshape(spec.dims)), nearest, normals)


# --- analytic shapes -------------------------------------------------------


def _check_inside(lo, hi):
    if np.any(np.asarray(lo) <= -DOMAIN) or np.any(np.asarray(hi) >= DOMAIN):
        raise DomainError("shape must fit strictly inside [-1, 1]^3")


@dataclass(frozen=True)
class Sphere:
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    radius: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if not self.radius > 0:
            raise DomainError("sphere radius must be positive")
        c = np.asarray(self.center)
        _check_inside(c - self.radius, c + self.radius)

    def sdf(self, p):
        return self.radius - np.linalg.norm(np.asarray(p) - self.center, axis=-1)

    def medial_distance(self, p):
        return np.linalg.norm(np.asarray(p) - self.center, axis=-1)

    def area(self):
        return 4.0 * np.pi * self.radius**2

    def volume(self):
        return 4.0 / 3.0 * np.pi * self.radius**3

    def sample(self, count, rng):
        u = rng.standard_normal((count, 3))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        return np.asarray(self.center) + self.radius * u, u


@dataclass(frozen=True)
class Box:
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    half_extents: tuple[float, float, float] = (0.4, 0.4, 0.4)

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        he = np.broadcast_to(np.asarray(self.half_extents, dtype=float), (3,))
        if np.any(he <= 0):
            raise DomainError("box half extents must be positive")
        object.__setattr__(self, "half_extents", tuple(float(v) for v in he))
        c = np.asarray(self.center)
        _check_inside(c - he, c + he)

    def sdf(self, p):
        q = np.abs(np.asarray(p) - self.center) - np.asarray(self.half_extents)
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        inside = np.minimum(np.max(q, axis=-1), 0.0)
        return -(outside + inside)

    def medial_distance(self, p):
        # Interior skeleton: points equidistant from two faces. Its sheets end
        # on the box edges, so the edges count as part of it from outside.
        he = np.asarray(self.half_extents)
        d = np.abs(np.asarray(p) - self.center)
        q = he - d
        qs = np.sort(q, axis=-1)
        interior = np.all(q > 0, axis=-1)
        skeleton = np.where(interior, (qs[..., 1] - qs[..., 0]) / np.sqrt(2.0), np.inf)
        edge = np.full(skeleton.shape, np.inf)
        for a in range(3):
            b, c = [i for i in range(3) if i != a]
            along = np.maximum(d[..., a] - he[a], 0.0)
            edge = np.minimum(edge, np.sqrt(q[..., b] ** 2 + q[..., c] ** 2 + along**2))
        return np.minimum(skeleton, edge)

    def area(self):
        a, b, c = (2 * v for v in self.half_extents)
        return 2.0 * (a * b + b * c + a * c)

    def volume(self):
        return float(np.prod([2 * v for v in self.half_extents]))

    def sample(self, count, rng):
        he = np.asarray(self.half_extents)
        face_area = np.array([he[1] * he[2], he[0] * he[2], he[0] * he[1]] * 2)
        face = rng.choice(6, size=count, p=face_area / face_area.sum())
        axis = face % 3
        sign = np.where(face < 3, 1.0, -1.0)
        local = rng.uniform(-1.0, 1.0, size=(count, 3)) * he
        rows = np.arange(count)
        local[rows, axis] = sign * he[axis]
        normals = np.zeros((count, 3))
        normals[rows, axis] = sign
        return np.asarray(self.center) + local, normals


@dataclass(frozen=True)
class Torus:
    """Ring around the z axis with major radius ``R`` and tube radius ``r``."""

    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    R: float = 0.5
    r: float = 0.2

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if not (self.r > 0 and self.R > self.r):
            raise DomainError("torus needs 0 < r < R")
        c = np.asarray(self.center)
        ext = np.array([self.R + self.r, self.R + self.r, self.r])
        _check_inside(c - ext, c + ext)

    def _rho_z(self, p):
        q = np.asarray(p) - self.center
        rho = np.hypot(q[..., 0], q[..., 1])
        return rho, q[..., 2]

    def sdf(self, p):
        rho, z = self._rho_z(p)
        return self.r - np.hypot(rho - self.R, z)

    def medial_distance(self, p):
        rho, z = self._rho_z(p)
        return np.minimum(np.hypot(rho - self.R, z), rho)

    def area(self):
        return 4.0 * np.pi**2 * self.R * self.r

    def volume(self):
        return 2.0 * np.pi**2 * self.R * self.r**2

    def sample(self, count, rng):
        # tube angle by rejection so that samples are uniform in area
        thetas = np.empty(0)
        while len(thetas) < count:
            t = rng.uniform(0.0, 2 * np.pi, size=2 * count)
            keep = rng.uniform(0.0, 1.0, size=t.size) < (self.R + self.r * np.cos(t)) / (self.R + self.r)
            thetas = np.concatenate([thetas, t[keep]])
        theta = thetas[:count]
        psi = rng.uniform(0.0, 2 * np.pi, size=count)
        cp, sp = np.cos(psi), np.sin(psi)
        ct, st = np.cos(theta), np.sin(theta)
        normals = np.stack([ct * cp, ct * sp, st], axis=1)
        core = np.stack([self.R * cp, self.R * sp, np.zeros(count)], axis=1)
        return np.asarray(self.center) + core + self.r * normals, normals


Shape = Sphere | Box | Torus


def analytic_sdf(shape: Shape, spec: GridSpec) -> ScalarField:
    return ScalarField(spec, shape.sdf(spec.points()))


def sample_shape_surface(shape: Shape, count: int, seed: int = 0) -> OrientedPointCloud:
    if count < 1:
        raise DomainError("count must be >= 1")
    rng = np.random.default_rng(seed)
    points, normals = shape.sample(int(count), rng)
    return OrientedPointCloud(points, normals)
