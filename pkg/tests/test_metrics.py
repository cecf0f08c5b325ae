import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lsrecon import (
    Box,
    DomainError,
    GridSpec,
    OccupancyGrid,
    ScalarField,
    Sphere,
    TriMesh,
    analytic_sdf,
    chamfer,
    iou,
    marching_cubes,
    voxelize_field,
    voxelize_mesh,
)
from lsrecon.metrics import voxel_grid
from lsrecon.surface import box_mesh

SPHERE_FRACTION = 4 / 3 * math.pi * 0.125 / 8


def brute_chamfer(a, b):
    diff = a[:, None, :] - b[None, :, :]
    d = np.sqrt(np.sum(diff * diff, axis=-1))
    return float(np.mean(d.min(axis=1))) + float(np.mean(d.min(axis=0)))


@pytest.fixture(scope="module")
def sphere_field():
    return analytic_sdf(Sphere(radius=0.5), GridSpec.cube(64))


def test_field_fraction(sphere_field):
    occ = voxelize_field(sphere_field, 128)
    assert occ.fraction == pytest.approx(SPHERE_FRACTION, rel=0.02)


def test_field_fraction_converges(sphere_field):
    err = [abs(voxelize_field(sphere_field, r).fraction - SPHERE_FRACTION) for r in (64, 128)]
    assert err[1] <= err[0]


def test_all_negative_field_is_empty():
    spec = GridSpec.cube(8)
    assert voxelize_field(ScalarField(spec, -np.ones(spec.dims)), 16).count == 0


def test_own_resolution_is_sign_test():
    spec = voxel_grid(20)
    phi = analytic_sdf(Sphere((0.05, 0, -0.1), 0.55), spec)
    occ = voxelize_field(phi, 20)
    np.testing.assert_array_equal(occ.bits, phi.values >= 0)


def test_box_mesh_fraction():
    occ = voxelize_mesh(box_mesh(Box((0, 0, 0), (0.5, 0.5, 0.5))), 64)
    assert occ.fraction == pytest.approx(0.125, rel=0.02)


def test_empty_mesh_and_open_mesh():
    assert voxelize_mesh(TriMesh.empty(), 16).count == 0
    open_mesh = TriMesh([[0, 0, 0], [0.5, 0, 0], [0, 0.5, 0]], [[0, 1, 2]])
    with pytest.raises(DomainError):
        voxelize_mesh(open_mesh, 16)


def test_mesh_and_field_paths_agree():
    phi = analytic_sdf(Sphere(radius=0.5), GridSpec.cube(64))
    a = voxelize_mesh(marching_cubes(phi), 64)
    b = voxelize_field(phi, 64)
    assert iou(a, b) >= 0.97


def test_rays_through_edges_are_resolved():
    # box edges sit exactly on voxel-centre rays
    res = 8
    he = 0.375
    occ = voxelize_mesh(box_mesh(Box((0, 0, 0), (he, he, he))), res)
    c = voxel_grid(res).points()
    inner = np.all(np.abs(c) < he - 1e-9, axis=-1)
    outer = np.any(np.abs(c) > he + 1e-9, axis=-1)
    assert np.all(occ.bits[inner])
    assert not np.any(occ.bits[outer])
    again = voxelize_mesh(box_mesh(Box((0, 0, 0), (he, he, he))), res)
    np.testing.assert_array_equal(occ.bits, again.bits)


def test_octahedron_vertex_on_ray():
    v = 0.5 * np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], dtype=float)
    t = [[0, 2, 4], [2, 1, 4], [1, 3, 4], [3, 0, 4], [2, 0, 5], [1, 2, 5], [3, 1, 5], [0, 3, 5]]
    occ = voxelize_mesh(TriMesh(v, t), 33)  # odd res puts a ray through the x-axis vertices
    c = voxel_grid(33).points()
    l1 = np.abs(c).sum(axis=-1)
    assert np.all(occ.bits[l1 < 0.5 - 1e-9])
    assert not np.any(occ.bits[l1 > 0.5 + 1e-9])


def test_iou_cases():
    spec = voxel_grid(4)
    a = np.zeros(spec.dims, dtype=bool)
    b = np.zeros(spec.dims, dtype=bool)
    a[0, :2, :] = True  # 8 voxels
    b[0, 1:3, :] = True  # 8 voxels, 4 shared
    A, B = OccupancyGrid(spec, a), OccupancyGrid(spec, b)
    assert A.count == 8 and B.count == 8
    assert iou(A, B) == pytest.approx(4 / 12)
    assert iou(A, A) == 1.0
    c = np.zeros(spec.dims, dtype=bool)
    c[3] = True
    assert iou(A, OccupancyGrid(spec, c)) == 0.0
    with pytest.raises(DomainError):
        iou(A, OccupancyGrid(voxel_grid(5), np.zeros((5, 5, 5), dtype=bool)))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_iou_properties(seed):
    rng = np.random.default_rng(seed)
    spec = voxel_grid(6)
    a = rng.uniform(size=spec.dims) < 0.4
    b = rng.uniform(size=spec.dims) < 0.4
    val = iou(OccupancyGrid(spec, a), OccupancyGrid(spec, b))
    assert 0.0 <= val <= 1.0
    # moving b toward a (shrinking the symmetric difference) never lowers IoU
    diff = np.argwhere(a ^ b)
    if len(diff):
        i, j, k = diff[0]
        c = b.copy()
        c[i, j, k] = a[i, j, k]
        assert iou(OccupancyGrid(spec, a), OccupancyGrid(spec, c)) >= val


def test_chamfer_examples():
    p = np.random.default_rng(0).uniform(-1, 1, size=(50, 3))
    assert chamfer(p, p) == 0.0
    assert chamfer([[0, 0, 0]], [[1, 0, 0]]) == 2.0
    with pytest.raises(DomainError):
        chamfer(np.zeros((0, 3)), p)


def test_chamfer_matches_brute_force():
    rng = np.random.default_rng(1)
    a = rng.uniform(-1, 1, size=(500, 3))
    b = rng.uniform(-1, 1, size=(500, 3))
    assert chamfer(a, b) == brute_chamfer(a, b)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 60), st.integers(1, 60))
def test_chamfer_axioms(seed, n, m):
    rng = np.random.default_rng(seed)
    a = rng.uniform(-1, 1, size=(n, 3))
    b = rng.uniform(-1, 1, size=(m, 3))
    ab = chamfer(a, b)
    assert ab == chamfer(b, a)
    assert ab >= 0.0
    assert ab == brute_chamfer(a, b)
