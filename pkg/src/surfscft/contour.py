"""Chebyshev contour grids, Crank-Nicolson sweeps and spectral deferred correction.

The semi-discrete propagator equation is ``M q' = -(A + F) q + g(t)`` where
``F`` is piecewise constant in ``t`` (one matrix per panel) and the load
``g`` is optional (only the manufactured benchmark uses it). A contour grid
is a sequence of panels; each panel carries Clenshaw-Curtis points
``a + (b - a)(1 - cos(k pi / n)) / 2``, ``k = 0..n`` and neighbouring panels
share their endpoint.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import chebyshev as C

from .assembly import SolverError, solve_sym

MIN_PANEL_NODES = 8


def chebyshev_panel(a: float, b: float, n: int) -> np.ndarray:
    """Clenshaw-Curtis points on ``[a, b]``: ``n + 1`` nodes, both ends exact."""
    if not b > a or (b - a) <= 1e-14 * max(1.0, abs(a), abs(b)):
        raise ValueError(f"invalid panel [{a}, {b}]")
    if n < 1:
        raise ValueError("a panel needs at least one interval")
    k = np.arange(n + 1)
    t = a + (b - a) * (1.0 - np.cos(np.pi * k / n)) / 2.0
    t[0], t[-1] = a, b
    return t


@lru_cache(maxsize=None)
def _cc_matrices(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Coefficient map and cumulative-integration matrix on ``[-1, 1]``.

    ``coef @ g`` gives Chebyshev coefficients ``c_k`` of the degree-``n``
    interpolant in ``g = sum c_k T_k``; ``cum @ g`` gives ``int_{-1}^{s_j} g``.
    """
    j = np.arange(n + 1)
    s = -np.cos(np.pi * j / n)
    k = j[:, None]
    # discrete cosine coefficients a_k = (2/n) sum'' g_j T_k(s_j)
    T = np.cos(k * np.arccos(np.clip(s[None, :], -1.0, 1.0)))
    w = np.full(n + 1, 2.0 / n)
    w[0] = w[-1] = 1.0 / n
    acoef = T * w[None, :]
    coef = acoef.copy()
    coef[0] *= 0.5
    coef[-1] *= 0.5
    cint = C.chebint(coef, lbnd=-1.0, axis=0)
    V = C.chebvander(s, n + 1)
    cum = V @ cint
    cum[0] = 0.0
    return coef, cum


def cc_weights(n: int) -> np.ndarray:
    """Clenshaw-Curtis weights on ``[-1, 1]`` for ``n + 1`` points.

    Built from the cosine coefficients as ``a_0 + sum_{even k} 2 a_k / (1 - k^2)``
    where for even ``n`` the last coefficient enters with half weight.
    """
    j = np.arange(n + 1)
    s = -np.cos(np.pi * j / n)
    T = np.cos(j[:, None] * np.arccos(np.clip(s[None, :], -1.0, 1.0)))
    w = np.full(n + 1, 2.0 / n)
    w[0] = w[-1] = 1.0 / n
    acoef = T * w[None, :]
    out = acoef[0].copy()
    for k in range(2, n + 1, 2):
        factor = 2.0 / (1.0 - k * k)
        if k == n:
            factor *= 0.5
        out += factor * acoef[k]
    return out


def clenshaw_curtis_integrate(values, a: float, b: float) -> np.ndarray:
    """Integral over ``[a, b]`` of samples at ``chebyshev_panel(a, b, n)``.

    ``values`` has the node axis first; trailing axes are integrated
    independently.
    """
    values = np.asarray(values, dtype=float)
    n = values.shape[0] - 1
    if n < 1:
        raise ValueError("need at least two nodes")
    return 0.5 * (b - a) * np.tensordot(cc_weights(n), values, axes=(0, 0))


def clenshaw_curtis_cumulative(values, a: float, b: float) -> np.ndarray:
    """``int_a^{t_k} g`` at every panel node via the spectral integration matrix."""
    values = np.asarray(values, dtype=float)
    n = values.shape[0] - 1
    if n < 1:
        raise ValueError("need at least two nodes")
    _, cum = _cc_matrices(n)
    return 0.5 * (b - a) * np.tensordot(cum, values, axes=(1, 0))


@dataclass(frozen=True)
class Panel:
    a: float
    b: float
    n: int

    @property
    def nodes(self) -> np.ndarray:
        return chebyshev_panel(self.a, self.b, self.n)


class ContourGrid:
    """Panels covering ``[0, T]`` with Clenshaw-Curtis nodes in each.

    ``nodes`` is the global node array (shared panel endpoints appear once);
    ``slices[i]`` indexes panel ``i``'s nodes in it.
    """

    def __init__(self, panels: Sequence[Panel]):
        self.panels = tuple(panels)
        for p, q in zip(self.panels[:-1], self.panels[1:]):
            if p.b != q.a:
                raise ValueError("panels must be contiguous")
        nodes = [self.panels[0].nodes]
        slices = [slice(0, self.panels[0].n + 1)]
        start = self.panels[0].n
        for p in self.panels[1:]:
            nodes.append(p.nodes[1:])
            slices.append(slice(start, start + p.n + 1))
            start += p.n
        self.nodes = np.concatenate(nodes)
        self.slices = tuple(slices)

    @property
    def n_intervals(self) -> int:
        return sum(p.n for p in self.panels)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def breakpoints(self) -> list[float]:
        return [p.b for p in self.panels[:-1]]

    @classmethod
    def single(cls, n: int, a: float = 0.0, b: float = 1.0) -> "ContourGrid":
        return cls([Panel(a, b, n)])

    @classmethod
    def split(cls, n_total: int, breakpoint: float, a: float = 0.0, b: float = 1.0,
              min_nodes: int = MIN_PANEL_NODES) -> "ContourGrid":
        """Two panels meeting at ``breakpoint``, node counts proportional to length."""
        if not a < breakpoint < b:
            raise ValueError("breakpoint must lie strictly inside the interval")
        L = b - a
        n1 = max(min_nodes, int(np.floor(n_total * (breakpoint - a) / L + 0.5)))
        n2 = max(min_nodes, int(np.floor(n_total * (b - breakpoint) / L + 0.5)))
        return cls([Panel(a, breakpoint, n1), Panel(breakpoint, b, n2)])

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Clenshaw-Curtis integral over the whole grid (node axis first)."""
        return sum(clenshaw_curtis_integrate(values[s], p.a, p.b)
                   for p, s in zip(self.panels, self.slices))

    def cumulative(self, values: np.ndarray) -> np.ndarray:
        out = np.empty_like(np.asarray(values, dtype=float))
        offset = 0.0
        for p, s in zip(self.panels, self.slices):
            c = clenshaw_curtis_cumulative(values[s], p.a, p.b) + offset
            out[s] = c
            offset = c[-1]
        return out


@dataclass
class PropagatorTrajectory:
    grid: ContourGrid
    values: np.ndarray  # (n_nodes, n_dof)

    def at_end(self) -> np.ndarray:
        return self.values[-1]

    def panel(self, i: int) -> np.ndarray:
        return self.values[self.grid.slices[i]]


class ContourSolveError(SolverError):
    def __init__(self, msg, node, correction=None, residual=None):
        super().__init__(msg, residual)
        self.node = node
        self.correction = correction


Forcing = Callable[[float], np.ndarray]


class _Stepper:
    """Crank-Nicolson steps for ``M y' = -K y + r`` sharing one sparsity pattern."""

    def __init__(self, M, A, F_per_panel, asm=None, tol=1e-12):
        self.M = M
        self.tol = tol
        self.K = []
        for F in F_per_panel:
            if F is None:
                self.K.append(A)
            else:
                self.K.append(_add_same_pattern(A, F))

    def step(self, panel_idx, dt, y, rhs_extra, x0, node, correction=None):
        K = self.K[panel_idx]
        S = _add_same_pattern(self.M, K, 0.5 * dt)
        rhs = self.M @ y - (0.5 * dt) * (K @ y)
        if rhs_extra is not None:
            rhs = rhs + rhs_extra
        try:
            return solve_sym(S, rhs, tol=self.tol, x0=x0)
        except SolverError as exc:
            raise ContourSolveError(
                f"CN solve failed at contour node {node}"
                + (f", correction pass {correction}" if correction is not None else "")
                + f": {exc}", node, correction, exc.residual) from exc


def _add_same_pattern(X, Y, c=1.0):
    import scipy.sparse as sp

    if (X.indptr is Y.indptr or np.array_equal(X.indptr, Y.indptr)) and \
            (X.indices is Y.indices or np.array_equal(X.indices, Y.indices)):
        return sp.csr_matrix((X.data + c * Y.data, X.indices, X.indptr), shape=X.shape)
    return (X + c * Y).tocsr()


def _forcing_at(forcing, t, nodes_shape):
    if forcing is None:
        return None
    return np.asarray(forcing(t), dtype=float)


def cn_sweep(M, A, F_per_panel, grid: ContourGrid, q0, forcing: Forcing | None = None,
             tol: float = 1e-12) -> PropagatorTrajectory:
    """Variable-step Crank-Nicolson over all grid nodes.

    Solves ``(M + dt/2 K) q^{n+1} = (M - dt/2 K) q^n + dt/2 (g^n + g^{n+1})``
    with ``K = A + F`` of the current panel.
    """
    if len(F_per_panel) != len(grid.panels):
        raise ValueError("need one field matrix per panel")
    q0 = np.asarray(q0, dtype=float)
    stepper = _Stepper(M, A, F_per_panel, tol=tol)
    out = np.empty((grid.n_nodes, q0.shape[0]))
    out[0] = q0
    t = grid.nodes
    g_prev = _forcing_at(forcing, t[0], q0.shape)
    for i, s in enumerate(grid.slices):
        for n in range(s.start, s.stop - 1):
            dt = t[n + 1] - t[n]
            extra = None
            if forcing is not None:
                g_next = _forcing_at(forcing, t[n + 1], q0.shape)
                extra = 0.5 * dt * (g_prev + g_next)
                g_prev = g_next
            out[n + 1] = stepper.step(i, dt, out[n], extra, out[n], n + 1)
    return PropagatorTrajectory(grid, out)


def sdc_correct(traj: PropagatorTrajectory, M, A, F_per_panel, J: int,
                forcing: Forcing | None = None, tol: float = 1e-12) -> PropagatorTrajectory:
    """Apply ``J`` deferred-correction passes to a Crank-Nicolson trajectory.

    Each pass forms the residual ``gamma(t) = M q(0) + int_0^t (-K q + g) - M q(t)``
    with the spectral cumulative integral, solves the error equation
    ``M e(t) = int_0^t -K e + gamma(t)`` by the same Crank-Nicolson steps and
    adds ``e`` to the trajectory.
    """
    if J < 0:
        raise ValueError("number of corrections must be nonnegative")
    if J == 0:
        return traj
    grid = traj.grid
    t = grid.nodes
    stepper = _Stepper(M, A, F_per_panel, tol=tol)
    q = traj.values.copy()
    g_nodes = None
    if forcing is not None:
        g_nodes = np.stack([np.asarray(forcing(tk), dtype=float) for tk in t])
    for j in range(J):
        gamma = np.empty_like(q)
        offset = np.zeros(q.shape[1])
        for i, (p, s) in enumerate(zip(grid.panels, grid.slices)):
            K = stepper.K[i]
            qs = q[s]
            G = -(K @ qs.T).T
            if g_nodes is not None:
                G += g_nodes[s]
            cum = clenshaw_curtis_cumulative(G, p.a, p.b)
            # residual relative to the panel start, then shifted by the running offset
            local = (M @ qs[0])[None, :] + cum - (M @ qs.T).T
            gamma[s] = local - local[0] + offset
            offset = gamma[s][-1]
        e = np.zeros_like(q)
        for i, s in enumerate(grid.slices):
            for n in range(s.start, s.stop - 1):
                dt = t[n + 1] - t[n]
                e[n + 1] = stepper.step(i, dt, e[n], gamma[n + 1] - gamma[n], e[n], n + 1, j)
        q = q + e
    return PropagatorTrajectory(grid, q)


def forward_grid(n_total: int, f: float) -> ContourGrid:
    return ContourGrid.split(n_total, f)


def backward_grid(n_total: int, f: float) -> ContourGrid:
    return ContourGrid.split(n_total, 1.0 - f)


def solve_propagator(direction: str, w_plus, w_minus, f: float, assembler, n_total: int = 200,
                     J: int = 1, grid: ContourGrid | None = None,
                     tol: float = 1e-12) -> PropagatorTrajectory:
    """Forward ``q`` or backward ``q^dagger`` propagator from ``q(., 0) = 1``.

    Forward: field ``w+ - w-`` on ``[0, f]`` and ``w+ + w-`` on ``[f, 1]``.
    Backward: ``w+ + w-`` on ``[0, 1 - f]`` and ``w+ - w-`` on ``[1 - f, 1]``.
    """
    if not 0.0 < f < 1.0:
        raise ValueError("block fraction f must lie in (0, 1)")
    wA = np.asarray(w_plus) - np.asarray(w_minus)
    wB = np.asarray(w_plus) + np.asarray(w_minus)
    if direction == "forward":
        grid = grid or forward_grid(n_total, f)
        fields = (wA, wB)
        bp = f
    elif direction == "backward":
        grid = grid or backward_grid(n_total, f)
        fields = (wB, wA)
        bp = 1.0 - f
    else:
        raise ValueError(f"direction must be 'forward' or 'backward', got {direction!r}")
    if len(grid.panels) != 2 or abs(grid.panels[0].b - bp) > 1e-15:
        raise ValueError("grid breakpoint does not match the block junction")
    M, A = assembler.mass, assembler.stiffness
    Fs = [assembler.field(w) for w in fields]
    q0 = np.ones(assembler.n_dof)
    traj = cn_sweep(M, A, Fs, grid, q0, tol=tol)
    return sdc_correct(traj, M, A, Fs, J, tol=tol)
