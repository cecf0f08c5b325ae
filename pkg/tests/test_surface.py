import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lsrecon import (
    Box,
    DomainError,
    GridSpec,
    ScalarField,
    Sphere,
    Torus,
    TriMesh,
    analytic_sdf,
    build_distance_field,
    marching_cubes,
    mesh_area_volume,
    sample_mesh_surface,
    sample_trilinear,
)
from lsrecon.gradcheck import random_smooth_field
from lsrecon.surface import box_mesh

SPHERE = Sphere(radius=0.5)


@pytest.fixture(scope="module")
def sphere64():
    phi = analytic_sdf(SPHERE, GridSpec.cube(64))
    return phi, marching_cubes(phi)


def test_sphere_vertices_within_h(sphere64):
    phi, mesh = sphere64
    r = np.linalg.norm(mesh.vertices, axis=1)
    assert np.max(np.abs(r - 0.5)) <= phi.spec.spacing


def test_sphere_watertight_area_volume(sphere64):
    _, mesh = sphere64
    m = mesh_area_volume(mesh)
    assert m.watertight
    assert m.area == pytest.approx(math.pi, rel=0.02)
    assert m.volume == pytest.approx(4 / 3 * math.pi * 0.125, rel=0.02)


def test_no_degenerate_triangles(sphere64):
    _, mesh = sphere64
    assert np.all(mesh.face_areas() >= 1e-12)
    t = mesh.triangles
    assert np.all((t[:, 0] != t[:, 1]) & (t[:, 1] != t[:, 2]) & (t[:, 0] != t[:, 2]))


def test_vertices_lie_on_level_set(sphere64):
    phi, mesh = sphere64
    vals = sample_trilinear(phi, mesh.vertices)
    assert np.max(np.abs(vals)) <= 1e-6 * np.ptp(phi.values)


def test_outward_orientation(sphere64):
    _, mesh = sphere64
    centroid = mesh.vertices.mean(axis=0)
    a, b, c = mesh.corners()
    outward = np.einsum("ij,ij->i", (a + b + c) / 3 - centroid, mesh.face_normals()) > 0
    assert outward.mean() >= 0.99


def test_all_positive_gives_empty_mesh():
    spec = GridSpec.cube(8)
    assert len(marching_cubes(ScalarField(spec, np.ones(spec.dims)))) == 0


def test_negation_reverses_winding():
    phi = analytic_sdf(Torus(), GridSpec.cube(24))
    a = marching_cubes(phi)
    b = marching_cubes(phi.with_values(-phi.values))
    np.testing.assert_array_equal(a.vertices, b.vertices)
    np.testing.assert_array_equal(canonical(a.triangles), canonical(b.triangles[:, ::-1]))


def canonical(tris):
    # rotate each triangle to start at its smallest index, keeping the winding
    shift = np.argmin(tris, axis=1)
    rows = np.arange(len(tris))[:, None]
    rolled = tris[rows, (shift[:, None] + np.arange(3)) % 3]
    return rolled[np.lexsort(rolled.T[::-1])]


def test_iso_level():
    phi = analytic_sdf(SPHERE, GridSpec.cube(32))
    mesh = marching_cubes(phi, iso=0.1)
    np.testing.assert_allclose(np.linalg.norm(mesh.vertices, axis=1), 0.4, atol=phi.spec.spacing)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.integers(8, 20))
def test_random_fields_give_closed_meshes(seed, n):
    spec = GridSpec.cube(n)
    phi = random_smooth_field(spec, np.random.default_rng(seed))
    # force negative boundary so the level set is closed
    v = np.array(phi.values)
    v[[0, -1]] = v[:, [0, -1]] = v[:, :, [0, -1]] = -1.0
    mesh = marching_cubes(phi.with_values(v))
    if len(mesh):
        assert mesh.is_watertight()
        assert np.all(mesh.face_areas() >= 1e-12)


def test_exact_zero_nodes_stay_watertight():
    # a plane through grid nodes makes many vertices coincide with nodes
    spec = GridSpec.cube(9)
    p = spec.points()
    phi = ScalarField(spec, 0.5 - np.max(np.abs(p), axis=-1))
    mesh = marching_cubes(phi)
    assert mesh.is_watertight()
    m = mesh_area_volume(mesh)
    assert m.volume == pytest.approx(1.0, rel=1e-9)


def test_single_triangle_measures():
    tri = TriMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])
    m = mesh_area_volume(tri)
    assert m.area == 0.5
    assert not m.watertight


def test_octahedron_measures():
    v = 0.5 * np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], dtype=float)
    t = [[0, 2, 4], [2, 1, 4], [1, 3, 4], [3, 0, 4], [2, 0, 5], [1, 2, 5], [3, 1, 5], [0, 3, 5]]
    m = mesh_area_volume(TriMesh(v, t))
    assert m.watertight
    # eight equilateral faces of side 0.5*sqrt(2)
    assert m.area == pytest.approx(8 * math.sqrt(3) / 4 * 0.5, rel=1e-12)
    assert m.volume == pytest.approx(1 / 6, rel=1e-12)


def test_box_mesh_measures():
    box = Box((0.1, 0, 0), (0.4, 0.3, 0.2))
    mesh = box_mesh(box)
    m = mesh_area_volume(mesh)
    assert m.watertight
    assert m.area == pytest.approx(box.area())
    assert m.volume == pytest.approx(box.volume())
    outward = np.einsum("ij,ij->i", mesh.vertices[mesh.triangles].mean(axis=1) - box.center, mesh.face_normals())
    assert np.all(outward > 0)


def test_single_triangle_samples():
    tri = TriMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])
    cloud = sample_mesh_surface(tri, 1000, 0)
    p = cloud.points
    assert np.all(p[:, 2] == 0) and np.all(p[:, :2] >= 0) and np.all(p.sum(axis=1) <= 1 + 1e-12)
    np.testing.assert_array_equal(cloud.normals, np.tile([0, 0, 1.0], (1000, 1)))


def test_sampling_follows_area():
    v = [[0, 0, 0], [0.5, 0, 0], [0, 0.5, 0], [0, 0, 0.5], [0.75, 0, 0.5], [0, 1.0, 0.5]]
    tri = TriMesh(v, [[0, 1, 2], [3, 4, 5]])
    np.testing.assert_allclose(tri.face_areas(), [0.125, 0.375])
    cloud = sample_mesh_surface(tri, 100_000, 3)
    share = np.mean(cloud.points[:, 2] == 0)
    assert abs(share - 0.25) <= 0.01


def test_sampling_deterministic_and_empty(sphere64):
    _, mesh = sphere64
    a = sample_mesh_surface(mesh, 500, 9)
    b = sample_mesh_surface(mesh, 500, 9)
    np.testing.assert_array_equal(a.points, b.points)
    with pytest.raises(DomainError):
        sample_mesh_surface(TriMesh.empty(), 10)


def test_round_trip_through_distance_field():
    spec = GridSpec.cube(32)
    mesh = marching_cubes(analytic_sdf(SPHERE, spec))
    cloud = sample_mesh_surface(mesh, 5000, 0)
    df = build_distance_field(cloud, spec)
    d_at_vertices = sample_trilinear(df.d, mesh.vertices)
    assert np.max(d_at_vertices) <= 2 * spec.spacing
