from math import factorial

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from surfscft.reference_element import (
    MultiIndex,
    barycentric,
    enumerate_multi_indices,
    eval_shape,
    eval_shape_gradient,
    gauss_rule,
    shape_basis,
)


def random_interior(n, seed=0):
    rng = np.random.default_rng(seed)
    u = rng.random((n, 2))
    flip = u.sum(axis=1) > 1
    u[flip] = 1 - u[flip]
    return u


def test_multi_indices_small_degrees():
    assert enumerate_multi_indices(0) == [(0, 0, 0)]
    assert enumerate_multi_indices(1) == [(1, 0, 0), (0, 1, 0), (0, 0, 1)]
    assert enumerate_multi_indices(2) == [(2, 0, 0), (1, 1, 0), (1, 0, 1), (0, 2, 0),
                                          (0, 1, 1), (0, 0, 2)]
    with pytest.raises(ValueError):
        enumerate_multi_indices(-1)


@pytest.mark.parametrize("p", range(0, 7))
def test_multi_index_order_and_count(p):
    idx = enumerate_multi_indices(p)
    assert len(idx) == (p + 1) * (p + 2) // 2
    assert all(isinstance(m, MultiIndex) and m.degree == p for m in idx)
    keys = [(m.m1 + m.m2, -m.m1) for m in idx]
    assert keys == sorted(keys)


def test_shape_examples():
    b1, b2 = shape_basis(1), shape_basis(2)
    assert eval_shape(b1, 1, (1.0, 0.0)) == pytest.approx(1.0)
    assert eval_shape(b2, 0, (1 / 3, 1 / 3)) == pytest.approx(-1 / 9, abs=1e-15)
    np.testing.assert_allclose(eval_shape_gradient(b1, 1, (0.2, 0.3)), [1.0, 0.0])
    np.testing.assert_allclose(eval_shape_gradient(b2, 0, (0.0, 0.0)), [-3.0, -3.0])


def test_shape_index_errors():
    b = shape_basis(2)
    with pytest.raises(IndexError):
        eval_shape(b, 6, (0.1, 0.1))
    with pytest.raises(IndexError):
        eval_shape_gradient(b, -1, (0.1, 0.1))


def test_outside_point_rejected_but_tolerance_band_accepted():
    b = shape_basis(2)
    with pytest.raises(ValueError):
        b.tabulate(np.array([[0.8, 0.3]]))
    b.tabulate(np.array([[1.0 + 5e-13, 0.0]]))


@pytest.mark.parametrize("p", range(1, 7))
def test_interpolation_property(p):
    b = shape_basis(p)
    T = b.tabulate(b.lattice_points)
    np.testing.assert_allclose(T, np.eye(b.n_basis), atol=1e-13)


@pytest.mark.parametrize("p", range(0, 7))
def test_partition_of_unity(p):
    b = shape_basis(p)
    u = random_interior(100, seed=p)
    np.testing.assert_allclose(b.tabulate(u).sum(axis=0), 1.0, atol=1e-12)
    np.testing.assert_allclose(b.tabulate_gradients(u).sum(axis=0), 0.0, atol=1e-11)


@pytest.mark.parametrize("p", range(1, 6))
def test_gradient_matches_finite_differences(p):
    b = shape_basis(p)
    u = 0.05 + 0.8 * random_interior(20, seed=10 + p) * 0.9
    h = 1e-6
    G = b.tabulate_gradients(u)
    for k, e in enumerate(np.eye(2)):
        fd = (b.tabulate(u + h * e, check=False) - b.tabulate(u - h * e, check=False)) / (2 * h)
        np.testing.assert_allclose(G[..., k], fd, atol=1e-6 * max(1, p**2))


@given(st.integers(1, 5), st.floats(0, 1), st.floats(0, 1))
@settings(max_examples=60, deadline=None)
def test_degree_p_polynomials_reproduced(p, s, t):
    # any polynomial of degree <= p is reproduced by its lattice interpolant
    if s + t > 1:
        s, t = 1 - s, 1 - t
    b = shape_basis(p)
    f = lambda u: (1 + u[..., 0]) ** p - 2 * u[..., 1] ** (p - 1) * u[..., 0]  # noqa: E731
    coef = f(b.lattice_points)
    val = coef @ b.tabulate(np.array([[s, t]]))[:, 0]
    assert val == pytest.approx(f(np.array([s, t])), abs=1e-11)


def test_gauss_rule_examples():
    r1 = gauss_rule(1)
    assert len(r1) == 1
    np.testing.assert_allclose(r1.barycentric, [[1 / 3, 1 / 3, 1 / 3]])
    np.testing.assert_allclose(r1.weights, [1.0])
    r3 = gauss_rule(3)
    lam = r3.barycentric
    assert np.sum(r3.reference_weights * lam.prod(axis=1)) == pytest.approx(1 / 120, abs=1e-15)
    phi0 = shape_basis(1).tabulate(gauss_rule(2).points)[0]
    assert np.sum(gauss_rule(2).reference_weights * phi0**2) == pytest.approx(1 / 12, abs=1e-15)
    for bad in (0, 21):
        with pytest.raises(ValueError):
            gauss_rule(bad)


@pytest.mark.parametrize("d", range(1, 21))
def test_quadrature_exactness(d):
    r = gauss_rule(d)
    assert r.weights.sum() == pytest.approx(1.0, abs=1e-14)
    assert np.all(r.barycentric >= -1e-14)
    lam = r.barycentric
    for a in range(d + 1):
        for b in range(d + 1 - a):
            for c in range(d + 1 - a - b):
                exact = factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 2)
                approx = np.sum(r.reference_weights * lam[:, 0]**a * lam[:, 1]**b * lam[:, 2]**c)
                assert approx == pytest.approx(exact, rel=1e-12, abs=1e-15)


def test_barycentric_map():
    np.testing.assert_allclose(barycentric(np.array([[0.2, 0.3]])), [[0.5, 0.2, 0.3]])
