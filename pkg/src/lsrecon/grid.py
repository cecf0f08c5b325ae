"""Cartesian grid fields and finite-difference calculus.

Fields are stored in memory as ``(nx, ny, nz)`` arrays indexed ``[i, j, k]``;
flattening with ``order="F"`` yields the x-fastest layout used on disk.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

# indices within this distance of an integer are snapped onto the node
_SNAP = 1e-9


@dataclass(frozen=True)
class GridSpec:
    dims: tuple[int, int, int]
    origin: tuple[float, float, float] = (-1.0, -1.0, -1.0)
    spacing: float = 1.0

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        origin = tuple(float(o) for o in self.origin)
        if len(dims) != 3 or len(origin) != 3:
            raise DomainError("grid dims and origin must be triples")
        if min(dims) < 2:
            raise DomainError(f"all grid dims must be >= 2, got {dims}")
        if not self.spacing > 0 or not np.isfinite(self.spacing):
            raise DomainError(f"spacing must be positive, got {self.spacing}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "spacing", float(self.spacing))

    @classmethod
    def cube(cls, n: int, lo: float = -1.0, hi: float = 1.0) -> "GridSpec":
        """``n`` nodes per axis spanning ``[lo, hi]^3`` exactly."""
        if n < 2:
            raise DomainError(f"resolution must be >= 2, got {n}")
        return cls((n, n, n), (lo, lo, lo), (hi - lo) / (n - 1))

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.dims

    @property
    def size(self) -> int:
        nx, ny, nz = self.dims
        return nx * ny * nz

    @property
    def cell_volume(self) -> float:
        return self.spacing**3

    @property
    def lower(self) -> np.ndarray:
        return np.asarray(self.origin)

    @property
    def upper(self) -> np.ndarray:
        return self.lower + self.spacing * (np.asarray(self.dims) - 1)

    def axes(self) -> list[np.ndarray]:
        return [o + self.spacing * np.arange(n) for o, n in zip(self.origin, self.dims)]

    def node(self, i: int, j: int, k: int) -> np.ndarray:
        return self.lower + self.spacing * np.array([i, j, k], dtype=float)

    def points(self) -> np.ndarray:
        """World coordinates of every node, shape ``(nx, ny, nz, 3)``."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def nearest_node(self, p) -> tuple[int, int, int]:
        idx = np.rint((np.asarray(p, dtype=float) - self.lower) / self.spacing).astype(int)
        idx = np.clip(idx, 0, np.asarray(self.dims) - 1)
        return tuple(int(v) for v in idx)


def _frozen(values: np.ndarray) -> np.ndarray:
    values = np.array(values, dtype=np.float64, copy=True)
    values.flags.writeable = False
    return values


@dataclass(frozen=True)
class ScalarField:
    spec: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.size != self.spec.size:
            raise DomainError(f"expected {self.spec.size} values, got {values.size}")
        values = values.reshape(self.spec.dims)
        if not np.all(np.isfinite(values)):
            raise DomainError("scalar field contains NaN or Inf")
        object.__setattr__(self, "values", _frozen(values))

    @classmethod
    def from_flat(cls, spec: GridSpec, flat) -> "ScalarField":
        """Build from an x-fastest flat array."""
        return cls(spec, np.asarray(flat, dtype=np.float64).reshape(spec.dims, order="F"))

    def flat(self) -> np.ndarray:
        return self.values.ravel(order="F")

    def with_values(self, values) -> "ScalarField":
        return ScalarField(self.spec, values)


@dataclass(frozen=True)
class VectorField:
    spec: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).reshape(self.spec.dims + (3,))
        if not np.all(np.isfinite(values)):
            raise DomainError("vector field contains NaN or Inf")
        object.__setattr__(self, "values", _frozen(values))

    def norm(self) -> np.ndarray:
        return np.linalg.norm(self.values, axis=-1)


def diff_axis(f: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Central differences inside, first-order one-sided at both ends."""
    f = np.moveaxis(f, axis, 0)
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - f[:-2]) / (2.0 * h)
    out[0] = (f[1] - f[0]) / h
    out[-1] = (f[-1] - f[-2]) / h
    return np.moveaxis(out, 0, axis)


def diff_axis_adjoint(w: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Transpose of :func:`diff_axis` as a linear map."""
    w = np.moveaxis(w, axis, 0)
    out = np.zeros_like(w)
    half = w[1:-1] / (2.0 * h)
    out[2:] += half
    out[:-2] -= half
    out[1] += w[0] / h
    out[0] -= w[0] / h
    out[-1] += w[-1] / h
    out[-2] -= w[-1] / h
    return np.moveaxis(out, 0, axis)


def grad_array(f: np.ndarray, h: float) -> np.ndarray:
    return np.stack([diff_axis(f, h, a) for a in range(3)], axis=-1)


def grad_adjoint_array(v: np.ndarray, h: float) -> np.ndarray:
    return sum(diff_axis_adjoint(v[..., a], h, a) for a in range(3))


def gradient(f: ScalarField) -> VectorField:
    return VectorField(f.spec, grad_array(f.values, f.spec.spacing))


def divergence(v: VectorField) -> ScalarField:
    h = v.spec.spacing
    return ScalarField(v.spec, sum(diff_axis(v.values[..., a], h, a) for a in range(3)))


def sample_trilinear(f: ScalarField, p) -> float | np.ndarray:
    """Trilinear interpolation at world point(s) ``p``.

    Accepts a single point or an ``(n, 3)`` array. Values at nodes are
    reproduced exactly.
    """
    pts = np.asarray(p, dtype=np.float64)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    spec = f.spec
    t = (pts - spec.lower) / spec.spacing
    near = np.rint(t)
    t = np.where(np.abs(t - near) <= _SNAP, near, t)
    hi = np.asarray(spec.dims) - 1
    if np.any(t < 0) or np.any(t > hi) or not np.all(np.isfinite(t)):
        raise DomainError("sample point outside the grid bounding box")
    i0 = np.minimum(np.floor(t).astype(np.int64), hi - 1)
    w = t - i0
    v = f.values
    i, j, k = i0[:, 0], i0[:, 1], i0[:, 2]
    wx, wy, wz = w[:, 0], w[:, 1], w[:, 2]
    ux, uy, uz = 1.0 - wx, 1.0 - wy, 1.0 - wz
    out = (
        v[i, j, k] * ux * uy * uz
        + v[i + 1, j, k] * wx * uy * uz
        + v[i, j + 1, k] * ux * wy * uz
        + v[i + 1, j + 1, k] * wx * wy * uz
        + v[i, j, k + 1] * ux * uy * wz
        + v[i + 1, j, k + 1] * wx * uy * wz
        + v[i, j + 1, k + 1] * ux * wy * wz
        + v[i + 1, j + 1, k + 1] * wx * wy * wz
    )
    return float(out[0]) if single else out
