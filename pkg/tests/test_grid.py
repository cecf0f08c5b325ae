import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lsrecon import DomainError, GridSpec, ScalarField, VectorField, divergence, gradient, sample_trilinear
from lsrecon.distance import Sphere, analytic_sdf
from lsrecon.grid import diff_axis, diff_axis_adjoint


def field_of(spec, fn):
    p = spec.points()
    return ScalarField(spec, fn(p[..., 0], p[..., 1], p[..., 2]))


def test_gridspec_validation():
    with pytest.raises(DomainError):
        GridSpec((1, 4, 4))
    with pytest.raises(DomainError):
        GridSpec((4, 4, 4), spacing=0.0)
    spec = GridSpec.cube(17)
    assert spec.spacing == 0.125
    np.testing.assert_array_equal(spec.lower, [-1, -1, -1])
    np.testing.assert_array_equal(spec.upper, [1, 1, 1])


def test_node_coordinates_reproducible():
    spec = GridSpec((5, 6, 7), origin=(0.1, -0.2, 0.3), spacing=0.05)
    pts = spec.points()
    for ijk in [(0, 0, 0), (4, 5, 6), (2, 3, 1)]:
        np.testing.assert_array_equal(pts[ijk], spec.node(*ijk))
        np.testing.assert_array_equal(spec.node(*ijk), np.array(spec.origin) + spec.spacing * np.array(ijk))


def test_field_rejects_nonfinite_and_is_readonly():
    spec = GridSpec.cube(4)
    vals = np.zeros(spec.dims)
    vals[1, 1, 1] = np.nan
    with pytest.raises(DomainError):
        ScalarField(spec, vals)
    f = ScalarField(spec, np.zeros(spec.dims))
    with pytest.raises(ValueError):
        f.values[0, 0, 0] = 1.0


def test_flat_layout_is_x_fastest():
    spec = GridSpec((2, 3, 4))
    f = field_of(spec, lambda x, y, z: x + 10 * y + 100 * z)
    flat = f.flat()
    assert flat[1] == f.values[1, 0, 0]
    assert flat[2] == f.values[0, 1, 0]
    np.testing.assert_array_equal(ScalarField.from_flat(spec, flat).values, f.values)


def test_gradient_of_constant_is_zero():
    spec = GridSpec.cube(9)
    g = gradient(ScalarField(spec, np.full(spec.dims, 3.7)))
    np.testing.assert_array_equal(g.values, 0.0)


@pytest.mark.parametrize("n", [3, 8, 17])
def test_gradient_exact_for_linear_including_boundaries(n):
    spec = GridSpec.cube(n)
    g = gradient(field_of(spec, lambda x, y, z: x))
    np.testing.assert_allclose(g.values[..., 0], 1.0, atol=1e-12)
    np.testing.assert_allclose(g.values[..., 1:], 0.0, atol=1e-12)


def test_gradient_exact_for_affine():
    spec = GridSpec((6, 7, 8), origin=(-0.3, 0.2, 0.0), spacing=0.1)
    g = gradient(field_of(spec, lambda x, y, z: 2 * x - 3 * y + 0.5 * z + 1))
    np.testing.assert_allclose(g.values, np.broadcast_to([2, -3, 0.5], g.values.shape), atol=1e-12)


def test_gradient_of_quadratic():
    spec = GridSpec.cube(17)
    g = gradient(field_of(spec, lambda x, y, z: x**2 + y**2))
    ijk = spec.nearest_node((0.5, 0.25, 0.0))
    np.testing.assert_allclose(g.values[ijk], [1.0, 0.5, 0.0], atol=spec.spacing**2)


def test_divergence_examples():
    spec = GridSpec.cube(11)
    const = VectorField(spec, np.broadcast_to([1.0, -2.0, 0.5], spec.dims + (3,)).copy())
    np.testing.assert_allclose(divergence(const).values, 0.0, atol=1e-12)
    ident = VectorField(spec, spec.points())
    np.testing.assert_allclose(divergence(ident).values[1:-1, 1:-1, 1:-1], 3.0, atol=1e-12)
    lap = divergence(gradient(field_of(spec, lambda x, y, z: x**2)))
    np.testing.assert_allclose(lap.values[2:-2, 2:-2, 2:-2], 2.0, atol=spec.spacing**2)


def test_laplacian_second_order_convergence():
    errs = []
    for n in (9, 17, 33):
        spec = GridSpec.cube(n)
        f = field_of(spec, lambda x, y, z: np.sin(x) * np.cos(y) + z**3)
        p = spec.points()
        exact = -2 * np.sin(p[..., 0]) * np.cos(p[..., 1]) + 6 * p[..., 2]
        lap = divergence(gradient(f)).values
        core = np.all(np.abs(p) <= 0.5, axis=-1)
        errs.append(np.max(np.abs(lap - exact)[core]))
    assert errs[0] / errs[1] >= 3.5
    assert errs[1] / errs[2] >= 3.5


def test_stencil_adjoint_is_transpose():
    rng = np.random.default_rng(3)
    f = rng.standard_normal((5, 6, 7))
    w = rng.standard_normal((5, 6, 7))
    for axis in range(3):
        lhs = np.sum(diff_axis(f, 0.3, axis) * w)
        rhs = np.sum(f * diff_axis_adjoint(w, 0.3, axis))
        np.testing.assert_allclose(lhs, rhs, rtol=1e-12)


def test_trilinear_node_values_exact():
    spec = GridSpec.cube(7)
    rng = np.random.default_rng(0)
    f = ScalarField(spec, rng.standard_normal(spec.dims))
    idx = rng.integers(0, 7, size=(50, 3))
    got = sample_trilinear(f, spec.points()[idx[:, 0], idx[:, 1], idx[:, 2]])
    np.testing.assert_array_equal(got, f.values[idx[:, 0], idx[:, 1], idx[:, 2]])


def test_trilinear_linear_field_cell_center():
    spec = GridSpec.cube(5)
    f = field_of(spec, lambda x, y, z: 3 * x + 1)
    centre = spec.node(1, 2, 0) + 0.5 * spec.spacing
    faces = 0.5 * (f.values[1, 2, 0] + f.values[2, 2, 0])
    np.testing.assert_allclose(sample_trilinear(f, centre), faces, rtol=1e-14)


def test_trilinear_sphere_within_h():
    spec = GridSpec.cube(33)
    sphere = Sphere(radius=0.5)
    f = analytic_sdf(sphere, spec)
    p = np.random.default_rng(1).uniform(-0.9, 0.9, size=(500, 3))
    np.testing.assert_array_less(np.abs(sample_trilinear(f, p) - sphere.sdf(p)), spec.spacing)


def test_trilinear_outside_raises():
    f = ScalarField(GridSpec.cube(4), np.zeros((4, 4, 4)))
    with pytest.raises(DomainError):
        sample_trilinear(f, (1.5, 0, 0))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1.0, 1.0), min_size=6, max_size=6), st.floats(0.0, 1.0))
def test_trilinear_monotone_along_axis(steps, t):
    # data increasing along x only; sampling along x must be monotone too
    spec = GridSpec((6, 3, 3), origin=(0, 0, 0), spacing=1.0)
    prof = np.cumsum(np.abs(steps))
    f = ScalarField(spec, np.broadcast_to(prof[:, None, None], spec.dims).copy())
    xs = np.linspace(0, 5, 41)
    pts = np.stack([xs, np.full_like(xs, t), np.full_like(xs, 2 * t)], axis=1)
    vals = sample_trilinear(f, pts)
    assert np.all(np.diff(vals) >= -1e-12)
