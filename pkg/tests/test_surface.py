import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from surfscft.surface import (
    ExpressionSurface,
    Paraboloid,
    ProjectionError,
    Saddle,
    Sphere,
    closest_point,
    make_surface,
    project_to_surface,
)


def test_sphere_radial_projection():
    np.testing.assert_allclose(project_to_surface((2.0, 0.0, 0.0), Sphere(1.0)), [1, 0, 0],
                               atol=1e-14)


@pytest.mark.parametrize("surface", [Sphere(1.3), Saddle(), Paraboloid()])
def test_points_on_surface_are_fixed(surface):
    rng = np.random.default_rng(1)
    x = surface.project(rng.uniform(-0.7, 0.7, (20, 3)))
    y = surface.project(x)
    np.testing.assert_allclose(y, x, atol=1e-12)
    assert np.max(np.abs(surface.psi(y))) <= 1e-12 * surface.scale


def _grid_nearest(x, height, lo=-1.5, hi=1.5):
    # brute-force distance minimization on nested parametric grids
    cx, cy, span = 0.5 * (lo + hi), 0.5 * (lo + hi), hi - lo
    for _ in range(6):
        s = np.linspace(-span / 2, span / 2, 401)
        X, Y = np.meshgrid(cx + s, cy + s, indexing="ij")
        d = (X - x[0])**2 + (Y - x[1])**2 + (height(X, Y) - x[2])**2
        i, j = np.unravel_index(np.argmin(d), d.shape)
        cx, cy, span = X[i, j], Y[i, j], span / 20
    return np.array([cx, cy, height(cx, cy)])


@pytest.mark.parametrize("x", [(0.0, 0.0, 1.0), (0.3, -0.4, 1.2), (0.8, 0.1, -0.3)])
def test_paraboloid_matches_grid_oracle(x):
    # seen from (0, 0, 1) the apex is a stationary point but not the nearest one
    surf = Paraboloid()
    y = project_to_surface(x, surf)
    ref = _grid_nearest(np.array(x), lambda a, b: a**2 + b**2)
    assert np.linalg.norm(y - np.array(x)) == pytest.approx(np.linalg.norm(ref - np.array(x)),
                                                            abs=1e-9)
    if np.hypot(x[0], x[1]) > 0:
        # off the axis the minimiser is unique
        np.testing.assert_allclose(y, ref, atol=1e-6)


@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-0.5, 0.5))
@settings(max_examples=40, deadline=None)
def test_projection_satisfies_kkt(a, b, dz):
    surf = Saddle()
    x = np.array([[a, b, a * a - b * b + dz]])
    y = surf.project(x)
    assert abs(surf.psi(y)[0]) <= 1e-12 * surf.scale
    # the offset is normal to the surface at the foot point
    r = (x - y)[0]
    n = surf.normal(y)[0]
    assert np.linalg.norm(r - (r @ n) * n) <= 1e-10


def test_projection_failure_reports_point():
    # a level set with no zero set cannot be reached
    surf = ExpressionSurface("x**2 + y**2 + z**2 + 1")
    with pytest.raises(ProjectionError) as info:
        closest_point(surf, np.array([[0.5, 0.0, 0.0]]))
    np.testing.assert_allclose(info.value.point, [0.5, 0.0, 0.0])


def test_expression_surface_matches_sphere():
    expr = ExpressionSurface("x**2 + y**2 + z**2 - 4", radius=2.0)
    x = np.array([[1.0, 2.0, 3.0], [0.1, -0.2, 0.05]])
    np.testing.assert_allclose(expr.project(x), Sphere(2.0).project(x), atol=1e-12)


def test_make_surface():
    assert isinstance(make_surface("sphere", radius=2.0), Sphere)
    assert isinstance(make_surface("saddle"), Saddle)
    with pytest.raises(ValueError):
        make_surface("torus")
