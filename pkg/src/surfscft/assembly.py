"""Sparse finite-element matrices on curved surface meshes, and the linear solver.

All matrices assembled by one :class:`Assembler` share a single CSR sparsity
pattern, so linear combinations such as ``M + dt/2 (A + F)`` are formed on
the ``data`` arrays directly.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import SurfaceMesh

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    def __init__(self, msg, residual=None):
        super().__init__(msg)
        self.residual = residual


@dataclass(frozen=True)
class DofMap:
    """One degree of freedom per Lagrange node of the mesh."""

    mesh: SurfaceMesh

    @property
    def degree(self) -> int:
        return self.mesh.degree

    @property
    def n_dof(self) -> int:
        return self.mesh.n_nodes

    @property
    def elem_dofs(self) -> np.ndarray:
        return self.mesh.elem_nodes


class Assembler:
    """Assembles mass, stiffness and field matrices for one mesh.

    Parameters
    ----------
    mesh : SurfaceMesh
    quad_degree : int, optional
        Exactness degree of the element rule, ``2p + 2`` by default.
    """

    def __init__(self, mesh: SurfaceMesh, quad_degree: int | None = None):
        self.mesh = mesh
        self.dofmap = DofMap(mesh)
        self.quad_degree = quad_degree or 2 * mesh.degree + 2
        self.geo = mesh.geometry(self.quad_degree)

    @property
    def n_dof(self) -> int:
        return self.dofmap.n_dof

    @cached_property
    def _pattern(self):
        en = self.dofmap.elem_dofs
        ne, n_p = en.shape
        N = self.n_dof
        rows = np.repeat(en, n_p, axis=1).ravel()
        cols = np.tile(en, (1, n_p)).ravel()
        keys = rows * N + cols
        uniq, inv = np.unique(keys, return_inverse=True)
        indices = (uniq % N).astype(np.int32)
        row_of = uniq // N
        indptr = np.zeros(N + 1, dtype=np.int64)
        np.add.at(indptr, row_of + 1, 1)
        np.cumsum(indptr, out=indptr)
        return inv, indices, indptr, len(uniq)

    def _from_elements(self, Ke: np.ndarray) -> sp.csr_matrix:
        inv, indices, indptr, nnz = self._pattern
        data = np.bincount(inv, weights=Ke.ravel(), minlength=nnz)
        N = self.n_dof
        return sp.csr_matrix((data, indices, indptr), shape=(N, N))

    @cached_property
    def _phi_products(self) -> np.ndarray:
        phi = self.geo.phi
        n_p, nq = phi.shape
        return (phi[:, None, :] * phi[None, :, :]).reshape(n_p * n_p, nq)

    def _weighted_mass(self, weight_q: np.ndarray | None) -> np.ndarray:
        dx = self.geo.dx
        if weight_q is not None:
            dx = dx * weight_q
        n_p = self.geo.phi.shape[0]
        return (dx @ self._phi_products.T).reshape(-1, n_p, n_p)

    @cached_property
    def mass(self) -> sp.csr_matrix:
        """``M_ij = (phi_i, phi_j)`` on the discrete surface."""
        return self._from_elements(self._weighted_mass(None))

    @cached_property
    def stiffness(self) -> sp.csr_matrix:
        """``A_ij = (grad_M phi_i, grad_M phi_j)``."""
        geo = self.geo
        Ke = np.einsum("aqk,eqkl,bql,eq->eab", geo.dphi, geo.inv_metric, geo.dphi, geo.dx,
                       optimize=True)
        return self._from_elements(Ke)

    def field(self, w: np.ndarray) -> sp.csr_matrix:
        """``F_ij = (w_h phi_i, phi_j)`` for nodal coefficients ``w``."""
        w = np.asarray(w, dtype=float)
        if w.shape != (self.n_dof,):
            raise ValueError(f"field has length {w.shape}, expected ({self.n_dof},)")
        wq = self.interpolate(w)
        return self._from_elements(self._weighted_mass(wq))

    def interpolate(self, v: np.ndarray) -> np.ndarray:
        """Values of a nodal field at the quadrature points, (ne, nq)."""
        return np.asarray(v)[self.dofmap.elem_dofs] @ self.geo.phi

    def load(self, fq: np.ndarray) -> np.ndarray:
        """``b_i = (f, phi_i)`` given ``f`` at the quadrature points."""
        be = (self.geo.dx * fq) @ self.geo.phi.T
        return np.bincount(self.dofmap.elem_dofs.ravel(), weights=be.ravel(),
                           minlength=self.n_dof)

    def integrate(self, v: np.ndarray) -> float:
        """Surface integral of the finite-element function with coefficients ``v``."""
        v = np.asarray(v, dtype=float)
        if v.shape != (self.n_dof,):
            raise ValueError(f"field has length {v.shape}, expected ({self.n_dof},)")
        return float(np.sum(self.geo.dx * self.interpolate(v)))

    def integrate_q(self, fq: np.ndarray) -> float:
        """Integral of a function given at the quadrature points."""
        return float(np.sum(self.geo.dx * fq))

    @cached_property
    def area(self) -> float:
        return float(self.geo.dx.sum())

    @cached_property
    def lumped_mass(self) -> np.ndarray:
        """``M @ 1``: integration weights for nodal fields."""
        return np.asarray(self.mass.sum(axis=1)).ravel()

    def combine(self, *terms) -> sp.csr_matrix:
        """Linear combination ``sum c_k S_k`` of matrices assembled here."""
        c0, S0 = terms[0]
        data = c0 * S0.data
        for c, S in terms[1:]:
            data = data + c * S.data
        return sp.csr_matrix((data, S0.indices, S0.indptr), shape=S0.shape)


def pcg(S, b, x0=None, tol=1e-10, max_iter=None, dinv=None):
    """Jacobi-preconditioned conjugate gradients.

    Returns ``(x, residual_norm, iterations, negative_curvature)``.
    """
    n = b.shape[0]
    if max_iter is None:
        max_iter = 10 * n
    if dinv is None:
        dinv = 1.0 / S.diagonal()
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b), 0.0, 0, False
    x = np.zeros_like(b) if x0 is None else x0.copy()
    r = b - S @ x
    rnorm = np.linalg.norm(r)
    if rnorm <= tol * bnorm:
        return x, rnorm, 0, False
    z = dinv * r
    p = z.copy()
    rz = r @ z
    for it in range(1, max_iter + 1):
        Sp = S @ p
        curv = p @ Sp
        if curv <= 0.0:
            return x, rnorm, it, True
        alpha = rz / curv
        x += alpha * p
        r -= alpha * Sp
        rnorm = np.linalg.norm(r)
        if rnorm <= tol * bnorm:
            return x, rnorm, it, False
        z = dinv * r
        rz_new = r @ z
        p *= rz_new / rz
        p += z
        rz = rz_new
    return x, rnorm, max_iter, False


def solve_sym(S, b, tol: float = 1e-10, max_iter: int | None = None, x0=None):
    """Solve the symmetric system ``S x = b`` to relative residual ``tol``.

    Jacobi-preconditioned CG; if CG meets a direction of non-positive
    curvature (``S`` indefinite) the solve restarts with MINRES.
    """
    b = np.asarray(b, dtype=float)
    if max_iter is None:
        max_iter = 10 * b.shape[0]
    diag = S.diagonal()
    if np.any(diag <= 0.0):
        x, rnorm, negative = None, np.inf, True
    else:
        x, rnorm, _, negative = pcg(S, b, x0, tol, max_iter, 1.0 / diag)
    bnorm = np.linalg.norm(b)
    if negative:
        log.debug("CG found negative curvature; switching to MINRES")
        x, info = spla.minres(S, b, x0=x0, rtol=tol * 0.5, maxiter=max_iter)
        rnorm = np.linalg.norm(b - S @ x)
    if rnorm > tol * bnorm * (1.0 + 1e-8):
        raise SolverError(
            f"linear solve did not converge: |r|/|b| = {rnorm / max(bnorm, 1e-300):.3e}",
            residual=rnorm,
        )
    return x


def assemble_mass(mesh: SurfaceMesh, dofmap: DofMap | None = None) -> sp.csr_matrix:
    return Assembler(mesh).mass


def assemble_stiffness(mesh: SurfaceMesh, dofmap: DofMap | None = None) -> sp.csr_matrix:
    return Assembler(mesh).stiffness


def assemble_field(mesh: SurfaceMesh, dofmap: DofMap | None, w: np.ndarray) -> sp.csr_matrix:
    return Assembler(mesh).field(w)


def integrate(mesh: SurfaceMesh, dofmap: DofMap | None, v: np.ndarray) -> float:
    return Assembler(mesh).integrate(v)


def dump_matrix(path, S) -> None:
    """Write a sparse matrix in MatrixMarket coordinate format."""
    import scipy.io

    scipy.io.mmwrite(str(path), sp.coo_matrix(S), field="real", symmetry="general")
