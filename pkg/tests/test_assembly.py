from math import factorial

import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from hypothesis import given, settings
from hypothesis import strategies as st

from surfscft.assembly import (
    Assembler,
    DofMap,
    SolverError,
    assemble_field,
    assemble_mass,
    assemble_stiffness,
    dump_matrix,
    integrate,
    solve_sym,
)
from surfscft.mesh import Forest, SurfaceMesh, build_icosphere, build_parametric_patch, refine
from surfscft.surface import Plane, Saddle


def flat_mesh(vertices, triangles, p=1):
    v = np.asarray(vertices, dtype=float)
    if v.shape[1] == 2:
        v = np.column_stack([v, np.zeros(len(v))])
    forest = Forest(Plane(), v, np.asarray(triangles))
    return SurfaceMesh(forest, range(len(triangles)), p)


def test_flat_right_triangle_p1():
    m = flat_mesh([(0, 0), (1, 0), (0, 1)], [(0, 1, 2)])
    asm = Assembler(m)
    M = asm.mass.toarray()
    A = asm.stiffness.toarray()
    np.testing.assert_allclose(M, 0.5 / 12 * np.array([[2, 1, 1], [1, 2, 1], [1, 1, 2]]),
                               atol=1e-15)
    np.testing.assert_allclose(A, 0.5 * np.array([[2, -1, -1], [-1, 1, 0], [-1, 0, 1]]),
                               atol=1e-15)


def test_sphere_mass_sum_is_area():
    m = build_icosphere(4, 1.0, 2)
    M = assemble_mass(m, DofMap(m))
    assert abs(M.sum() - 4 * np.pi) / (4 * np.pi) < 1e-4
    assert DofMap(m).n_dof == m.n_nodes == 40 * 4**4 + 2


def test_integrate_examples():
    m = build_icosphere(3, 1.0, 3)
    one = integrate(m, None, np.ones(m.n_nodes))
    # the quadrature part is exact; what remains is the h^4 geometric error
    assert one == pytest.approx(Assembler(m, quad_degree=16).integrate(np.ones(m.n_nodes)),
                                rel=1e-8)
    assert abs(one - 4 * np.pi) / (4 * np.pi) < 3e-6
    fine = build_icosphere(4, 1.0, 3)
    assert abs(integrate(fine, None, np.ones(fine.n_nodes)) - 4 * np.pi) / (4 * np.pi) < 1e-6
    assert integrate(m, None, np.zeros(m.n_nodes)) == 0.0
    assert abs(integrate(m, None, m.nodes[:, 2])) <= 1e-10
    with pytest.raises(ValueError):
        integrate(m, None, np.ones(3))


@pytest.mark.parametrize("p", [1, 2, 3])
def test_integrate_equals_ones_mass_v(p):
    m = build_icosphere(1, 1.5, p)
    asm = Assembler(m)
    v = np.random.default_rng(p).random(m.n_nodes)
    assert asm.integrate(v) == pytest.approx(np.ones(m.n_nodes) @ (asm.mass @ v), abs=1e-12)


@pytest.mark.parametrize("p", [1, 2, 3])
def test_mass_spd_and_stiffness_kernel(p):
    m = build_icosphere(1, 1.0, p)
    asm = Assembler(m)
    M, A = asm.mass.toarray(), asm.stiffness.toarray()
    assert np.linalg.eigvalsh(M).min() > 0
    np.testing.assert_allclose(A @ np.ones(m.n_nodes), 0.0, atol=1e-10)
    for S in (M, A, asm.field(np.random.default_rng(0).random(m.n_nodes)).toarray()):
        assert np.max(np.abs(S - S.T)) <= 1e-12 * np.max(np.abs(S))


def test_sphere_laplace_beltrami_eigenvalue():
    m = build_icosphere(4, 1.0, 2)
    asm = Assembler(m)
    vals = spla.eigsh(asm.stiffness.tocsc(), k=5, M=asm.mass.tocsc(), sigma=-0.1,
                      return_eigenvectors=False)
    vals = np.sort(vals)
    assert abs(vals[0]) < 1e-8
    np.testing.assert_allclose(vals[1:4], 2.0, rtol=1e-2)


def test_field_matrix_examples():
    m = build_icosphere(1, 1.0, 2)
    asm = Assembler(m)
    assert assemble_field(m, None, np.zeros(m.n_nodes)).count_nonzero() == 0
    F = asm.field(np.full(m.n_nodes, 2.5))
    assert abs(F - 2.5 * asm.mass).max() <= 1e-12
    with pytest.raises(ValueError):
        asm.field(np.ones(m.n_nodes + 1))


def _bary_integral(a, b, c):
    # integral of l0^a l1^b l2^c over a triangle, divided by twice its area
    return factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 2)


def test_field_matrix_matches_exact_oracle_on_two_triangles():
    pts = np.array([(0, 0), (1.3, 0), (0.2, 0.9), (1.5, 1.1)])
    tris = [(0, 1, 2), (1, 3, 2)]
    m = flat_mesh(pts, tris)
    w = np.random.default_rng(5).normal(size=m.n_nodes)
    F = Assembler(m).field(w).toarray()

    ref = np.zeros((4, 4))
    vid = {int(v): i for i, v in enumerate(m.vertex_ids)}
    for t in tris:
        P = pts[list(t)]
        (x1, y1), (x2, y2) = P[1] - P[0], P[2] - P[0]
        area2 = abs(x1 * y2 - x2 * y1)
        for i in range(3):
            for j in range(3):
                for k in range(3):
                    e = np.zeros(3, dtype=int)
                    e[i] += 1
                    e[j] += 1
                    e[k] += 1
                    gi, gj, gk = (vid[t[x]] for x in (i, j, k))
                    ref[gi, gj] += area2 * w[gk] * _bary_integral(*e)
    np.testing.assert_allclose(F, ref, atol=1e-12)


@pytest.mark.parametrize("solver_case", ["diag", "mass", "spd"])
def test_solve_sym_examples(solver_case):
    rng = np.random.default_rng(2)
    if solver_case == "diag":
        d = rng.uniform(1, 5, 30)
        S, b = sp.diags(d).tocsr(), rng.normal(size=30)
        np.testing.assert_allclose(solve_sym(S, b), b / d, rtol=1e-10)
    elif solver_case == "mass":
        M = Assembler(build_icosphere(2, 1.0, 2)).mass
        x = solve_sym(M, M @ np.ones(M.shape[0]))
        np.testing.assert_allclose(x, 1.0, rtol=1e-8)
    else:
        Q, _ = np.linalg.qr(rng.normal(size=(50, 50)))
        S = sp.csr_matrix(Q @ np.diag(rng.uniform(0.5, 20, 50)) @ Q.T)
        xs = rng.normal(size=50)
        x = solve_sym(S, S @ xs)
        np.testing.assert_allclose(x, xs, atol=1e-8)
        assert np.linalg.norm(S @ x - S @ xs) <= 1e-10 * np.linalg.norm(S @ xs)


def test_solve_sym_indefinite_uses_minres_and_reports_failure():
    rng = np.random.default_rng(4)
    d = np.concatenate([rng.uniform(1, 3, 20), -rng.uniform(1, 3, 5)])
    Q, _ = np.linalg.qr(rng.normal(size=(25, 25)))
    S = sp.csr_matrix(Q @ np.diag(d) @ Q.T)
    b = rng.normal(size=25)
    x = solve_sym(S, b)
    assert np.linalg.norm(S @ x - b) <= 1e-10 * np.linalg.norm(b) * 1.01
    big = sp.csr_matrix(np.diag(np.logspace(0, 8, 200)) + 0.0)
    big = big + sp.csr_matrix(np.diag(np.ones(199), 1) * 1e3) + sp.csr_matrix(np.diag(np.ones(199), -1) * 1e3)
    with pytest.raises(SolverError) as info:
        solve_sym(big.tocsr(), np.ones(200), tol=1e-14, max_iter=3)
    assert info.value.residual > 0


def test_sparsity_within_adjacency():
    m = refine(build_icosphere(1, 1.0, 2), {5: 1})
    asm = Assembler(m)
    adj = set()
    for row in m.elem_nodes:
        for a in row:
            for b in row:
                adj.add((int(a), int(b)))
    w = np.random.default_rng(1).random(m.n_nodes)
    for S in (asm.mass, asm.stiffness, asm.field(w)):
        coo = S.tocoo()
        assert {(int(i), int(j)) for i, j in zip(coo.row, coo.col)} <= adj


@given(st.floats(0.1, 10.0))
@settings(max_examples=10, deadline=None)
def test_scaling_of_mass_and_stiffness(s):
    pts = np.array([(0, 0), (1, 0.1), (0.3, 1), (1.2, 1.3)])
    tris = [(0, 1, 2), (1, 3, 2)]
    a0 = Assembler(flat_mesh(pts, tris, p=2))
    a1 = Assembler(flat_mesh(s * pts, tris, p=2))
    assert abs(a1.mass - s**2 * a0.mass).max() <= 1e-12 * s**2 * abs(a0.mass).max()
    assert abs(a1.stiffness - a0.stiffness).max() <= 1e-12 * abs(a0.stiffness).max()


def _quadrature_change(mesh, name):
    p = mesh.degree
    S0 = getattr(Assembler(mesh), name)
    S1 = getattr(Assembler(mesh, quad_degree=2 * p + 4), name)
    return abs(S1 - S0).max() / abs(S1).max()


def test_quadrature_sufficiency_affine():
    pts = np.array([(0, 0), (1, 0.1), (0.3, 1), (1.2, 1.3)])
    m = flat_mesh(pts, [(0, 1, 2), (1, 3, 2)], p=3)
    for name in ("mass", "stiffness"):
        assert _quadrature_change(m, name) <= 1e-13
    for name in ("mass", "stiffness"):
        assert _quadrature_change(build_icosphere(2, 1.0, 1), name) <= 1e-13


@pytest.mark.parametrize("p", [2, 3])
def test_quadrature_sufficiency_curved(p):
    # sqrt(det g) is not polynomial on curved elements, so the change from
    # raising the rule is small and shrinks at least like h^3 under refinement
    for name in ("mass", "stiffness"):
        c = [_quadrature_change(build_icosphere(L, 1.0, p), name) for L in (2, 3, 4)]
        assert c[0] < 1e-5
        assert c[1] / c[0] < 2.0**-3 and c[2] / c[1] < 2.0**-3
    for name in ("mass", "stiffness"):
        assert _quadrature_change(build_parametric_patch(Saddle(), resolution=12, p=p), name) < 1e-5


def test_combine_and_dump(tmp_path):
    asm = Assembler(build_icosphere(1, 1.0, 1))
    S = asm.combine((1.0, asm.mass), (0.25, asm.stiffness))
    assert abs(S - (asm.mass + 0.25 * asm.stiffness)).max() <= 1e-15
    dump_matrix(tmp_path / "m.mtx", asm.mass)
    import scipy.io

    assert abs(scipy.io.mmread(str(tmp_path / "m.mtx")) - asm.mass).max() <= 1e-14
    assert assemble_stiffness(asm.mesh).shape == asm.mass.shape
