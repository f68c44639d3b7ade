import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import simpson

from surfscft.assembly import Assembler
from surfscft.contour import (
    ContourGrid,
    Panel,
    PropagatorTrajectory,
    backward_grid,
    chebyshev_panel,
    clenshaw_curtis_cumulative,
    clenshaw_curtis_integrate,
    cn_sweep,
    forward_grid,
    sdc_correct,
    solve_propagator,
)
from surfscft.mesh import build_icosphere


def scalar(v):
    return sp.csr_matrix(np.array([[float(v)]]))


def scalar_error(n, J, w=1.0):
    grid = ContourGrid.single(n)
    M, A, F = scalar(1.0), sp.csr_matrix((1, 1)), scalar(w)
    traj = cn_sweep(M, A, [F], grid, np.ones(1), tol=1e-15)
    traj = sdc_correct(traj, M, A, [F], J, tol=1e-15)
    return abs(traj.at_end()[0] - np.exp(-w))


def slope(ns, errs):
    return -np.polyfit(np.log(ns), np.log(errs), 1)[0]


def test_chebyshev_panel_examples():
    np.testing.assert_allclose(chebyshev_panel(0, 1, 2), [0, 0.5, 1], atol=1e-16)
    assert chebyshev_panel(0, 1, 4)[1] == pytest.approx(0.146446609406726, abs=1e-14)
    t = chebyshev_panel(-0.3, 2.0, 17)
    assert t[0] == -0.3 and t[-1] == 2.0 and np.all(np.diff(t) > 0)
    for a, b, n in ((1.0, 1.0 - 1e-16, 4), (1.0, 1.0, 4), (0.0, 1.0, 0)):
        with pytest.raises(ValueError):
            chebyshev_panel(a, b, n)


@pytest.mark.parametrize("n", [1, 2, 3, 8, 33])
def test_cc_integrates_constants(n):
    assert clenshaw_curtis_integrate(np.ones(n + 1), 0.0, 1.0) == pytest.approx(1.0, abs=1e-14)


def test_cc_examples():
    t = chebyshev_panel(-1, 1, 4)
    assert clenshaw_curtis_integrate(t**2, -1, 1) == pytest.approx(2 / 3, abs=1e-14)
    t = chebyshev_panel(-1, 1, 8)
    assert clenshaw_curtis_integrate(np.exp(t), -1, 1) == pytest.approx(np.e - 1 / np.e, abs=1e-6)
    with pytest.raises(ValueError):
        clenshaw_curtis_integrate(np.ones(1), 0, 1)


@pytest.mark.parametrize("n", [1, 2, 5, 8, 16, 31, 64])
def test_cc_polynomial_exactness(n):
    # monomials stay bounded by 1 so round-off does not mask exactness
    a, b = -0.6, 1.0
    t = chebyshev_panel(a, b, n)
    for d in range(n + 1):
        exact = (b ** (d + 1) - a ** (d + 1)) / (d + 1)
        assert clenshaw_curtis_integrate(t**d, a, b) == pytest.approx(exact, rel=1e-12, abs=1e-13)
        cum = clenshaw_curtis_cumulative(t**d, a, b)
        np.testing.assert_allclose(cum, (t ** (d + 1) - a ** (d + 1)) / (d + 1), atol=1e-12)


def test_cumulative_examples():
    t = chebyshev_panel(0, 1, 12)
    np.testing.assert_allclose(clenshaw_curtis_cumulative(np.ones(13), 0, 1), t, atol=1e-15)
    np.testing.assert_allclose(clenshaw_curtis_cumulative(2 * t, 0, 1), t**2, atol=1e-13)
    v = np.stack([np.ones(13), 2 * t], axis=1)
    out = clenshaw_curtis_cumulative(v, 0, 1)
    assert out.shape == (13, 2)


@given(st.integers(0, 10_000))
@settings(max_examples=10, deadline=None)
def test_cumulative_matches_simpson_oracle(seed):
    rng = np.random.default_rng(seed)
    c, ph = rng.normal(size=5), rng.uniform(0, 2 * np.pi, 5)
    g = lambda x: sum(c[k] * np.cos(k * x + ph[k]) for k in range(5))  # noqa: E731
    t = chebyshev_panel(0, 1, 32)
    cum = clenshaw_curtis_cumulative(g(t), 0, 1)
    ref = [0.0] + [simpson(g(np.linspace(0, tk, 4001)), x=np.linspace(0, tk, 4001)) for tk in t[1:]]
    np.testing.assert_allclose(cum, ref, atol=1e-10)
    assert cum[-1] == pytest.approx(clenshaw_curtis_integrate(g(t), 0, 1), abs=1e-13)


def test_grid_structure():
    grid = ContourGrid.split(200, 0.2)
    assert grid.breakpoints == [0.2]
    assert grid.n_intervals == 200
    assert grid.nodes[grid.slices[0].stop - 1] == 0.2
    assert np.all(np.diff(grid.nodes) > 0)
    small = ContourGrid.split(20, 0.05)
    assert [p.n for p in small.panels] == [8, 19]
    with pytest.raises(ValueError):
        ContourGrid([Panel(0, 0.5, 4), Panel(0.6, 1, 4)])
    assert forward_grid(100, 0.3).breakpoints == [0.3]
    assert backward_grid(100, 0.3).breakpoints == [pytest.approx(0.7)]
    g = ContourGrid.split(64, 0.4)
    assert g.integrate(np.exp(g.nodes)) == pytest.approx(np.e - 1, abs=1e-14)
    np.testing.assert_allclose(g.cumulative(np.exp(g.nodes)), np.exp(g.nodes) - 1, atol=1e-13)


def test_cn_zero_operator_keeps_q():
    grid = ContourGrid.single(10)
    M = sp.identity(3, format="csr")
    Z = sp.csr_matrix((3, 3))
    traj = cn_sweep(M, Z, [None], grid, np.array([1.0, 2.0, 3.0]))
    np.testing.assert_allclose(traj.values, np.tile([1.0, 2.0, 3.0], (11, 1)))
    assert sdc_correct(traj, M, Z, [None], 0) is traj


def test_cn_scalar_order():
    ns = np.array([16, 32, 64, 128])
    errs = [scalar_error(n, 0) for n in ns]
    assert errs[2] < 1e-4
    assert slope(ns, errs) == pytest.approx(2.0, abs=0.1)


@pytest.mark.parametrize("J,ns", [(1, [8, 16, 32]), (2, [4, 6, 8, 12])])
def test_sdc_scalar_order(J, ns):
    errs = [scalar_error(n, J) for n in ns]
    assert slope(np.array(ns), errs) == pytest.approx(2 * (J + 1), rel=0.2)


def test_sdc_leaves_exact_polynomial_trajectory():
    k = 3.0
    grid = ContourGrid.split(16, 0.4)
    t = grid.nodes
    M, A = scalar(1.0), scalar(k)
    forcing = lambda s: np.array([3 * s**2 + k * s**3])  # noqa: E731
    traj = PropagatorTrajectory(grid, (t**3)[:, None])
    out = sdc_correct(traj, M, A, [None, None], 1, forcing=forcing, tol=1e-15)
    np.testing.assert_allclose(out.values, traj.values, atol=1e-12)


@pytest.fixture(scope="module")
def small():
    return Assembler(build_icosphere(1, 2.0, 2))


def test_propagator_zero_fields(small):
    z = np.zeros(small.n_dof)
    for d in ("forward", "backward"):
        q = solve_propagator(d, z, z, 0.3, small, n_total=40)
        np.testing.assert_allclose(q.values, 1.0, atol=1e-10)
        assert np.all(q.values >= 0)


@pytest.mark.parametrize("c", [0.5, -1.2])
def test_propagator_constant_pressure_decay(small, c):
    wp, wm = np.full(small.n_dof, c), np.zeros(small.n_dof)
    q = solve_propagator("forward", wp, wm, 0.2, small, n_total=40, J=1)
    exact = np.exp(-c * q.grid.nodes)[:, None]
    np.testing.assert_allclose(q.values, np.broadcast_to(exact, q.values.shape), rtol=1e-6)


def test_backward_equals_forward_with_exchanged_blocks(small):
    rng = np.random.default_rng(0)
    wp, wm = rng.normal(size=small.n_dof), rng.normal(size=small.n_dof)
    fwd = solve_propagator("forward", wp, wm, 0.5, small, n_total=40)
    bwd = solve_propagator("backward", wp, -wm, 0.5, small, n_total=40)
    np.testing.assert_allclose(bwd.grid.nodes, fwd.grid.nodes)
    np.testing.assert_allclose(bwd.values, fwd.values, atol=1e-10)


def test_propagator_argument_errors(small):
    z = np.zeros(small.n_dof)
    with pytest.raises(ValueError):
        solve_propagator("sideways", z, z, 0.3, small)
    with pytest.raises(ValueError):
        solve_propagator("forward", z, z, 1.2, small)
    with pytest.raises(ValueError):
        solve_propagator("forward", z, z, 0.3, small, grid=ContourGrid.split(40, 0.5))
