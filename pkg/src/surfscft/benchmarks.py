"""Manufactured parabolic problem on the unit sphere and convergence studies.

The exact solution is ``u = sin(pi x) sin(pi y) sin(pi z) e^{-t}`` and the
load is ``f = u_t - Lap_M u``. The closed form of ``f`` below carries the
factor ``2 pi^2`` on the ``xy cos(pi x) cos(pi y) sin(pi z)`` term; the tests
check it symbolically and by finite differences.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .assembly import Assembler, solve_sym
from .contour import ContourGrid, cc_weights, cn_sweep, sdc_correct
from .mesh import SurfaceMesh, build_icosphere

PI = np.pi


def exact_solution(x: np.ndarray, t: float) -> np.ndarray:
    x = np.atleast_2d(x)
    return np.sin(PI * x[:, 0]) * np.sin(PI * x[:, 1]) * np.sin(PI * x[:, 2]) * np.exp(-t)


def forcing_spatial(x: np.ndarray) -> np.ndarray:
    """``e^{t} f(x, t)``; the load separates as ``f = e^{-t} F(x)``."""
    x = np.atleast_2d(x)
    X, Y, Z = x[:, 0], x[:, 1], x[:, 2]
    sx, sy, sz = np.sin(PI * X), np.sin(PI * Y), np.sin(PI * Z)
    cx, cy, cz = np.cos(PI * X), np.cos(PI * Y), np.cos(PI * Z)
    r2 = X * X + Y * Y + Z * Z
    out = (2 * PI**2 - 1.0) * sx * sy * sz
    out += 2 * PI * (Z * sx * sy * cz + Y * sx * sz * cy + X * sy * sz * cx) / r2
    out += 2 * PI**2 * (X * Y * sz * cx * cy + X * Z * sy * cx * cz + Y * Z * sx * cy * cz) / r2
    return out


def forcing(x: np.ndarray, t: float) -> np.ndarray:
    return np.exp(-t) * forcing_spatial(x)


@dataclass(frozen=True)
class BenchmarkProblem:
    """Heat equation ``u_t = Lap_M u + f`` on the unit sphere up to ``T``."""

    T: float = 1.0

    def exact(self, x, t):
        return exact_solution(x, t)

    def forcing(self, x, t):
        return forcing(x, t)


def _on_sphere(x: np.ndarray) -> np.ndarray:
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


@dataclass
class HeatResult:
    n_dof: int
    h: float
    n_t: int
    J: int
    error: float
    trajectory: np.ndarray = field(repr=False)
    grid: ContourGrid = field(repr=False)


class HeatSolver:
    """Surface FEM for the benchmark on one mesh, reusable across contour grids."""

    def __init__(self, mesh: SurfaceMesh, problem: BenchmarkProblem = BenchmarkProblem(),
                 initial: str = "ritz"):
        if initial not in ("ritz", "interpolate"):
            raise ValueError(f"unknown initial data {initial!r}")
        self.mesh = mesh
        self.problem = problem
        self.initial_kind = initial
        self.asm = Assembler(mesh)
        xq = self.asm.geo.x.reshape(-1, 3)
        self._xq_exact = _on_sphere(xq)
        fq = forcing_spatial(self._xq_exact).reshape(self.asm.geo.dx.shape)
        self._load = self.asm.load(fq)

    def load(self, t: float) -> np.ndarray:
        return np.exp(-t) * self._load

    def initial(self) -> np.ndarray:
        """Discrete initial data.

        ``"interpolate"`` takes nodal values of ``u(., 0)``. ``"ritz"`` is the
        H1 projection ``(A + M) u_h = (-Lap_M u + u, phi)``, using
        ``-Lap_M u(., 0) = F + u(., 0)``; it carries almost nothing in the
        stiff discrete modes, which Crank-Nicolson does not damp.
        """
        if self.initial_kind == "interpolate":
            return exact_solution(self.mesh.nodes, 0.0)
        shape = self.asm.geo.dx.shape
        rhs_q = forcing_spatial(self._xq_exact) + 2.0 * exact_solution(self._xq_exact, 0.0)
        S = self.asm.combine((1.0, self.asm.stiffness), (1.0, self.asm.mass))
        return solve_sym(S, self.asm.load(rhs_q.reshape(shape)), tol=1e-14)

    def solve(self, grid: ContourGrid, J: int = 0, tol: float = 1e-13) -> np.ndarray:
        asm = self.asm
        Fs = [None] * len(grid.panels)
        tr = cn_sweep(asm.mass, asm.stiffness, Fs, grid, self.initial(), forcing=self.load, tol=tol)
        tr = sdc_correct(tr, asm.mass, asm.stiffness, Fs, J, forcing=self.load, tol=tol)
        return tr.values

    def l2_error_exact(self, uh: np.ndarray, t: float) -> float:
        """``||u(., t) - u_h||`` on the discrete surface, ``u`` taken at the closest point."""
        uq = self.asm.interpolate(uh)
        ue = exact_solution(self._xq_exact, t).reshape(uq.shape)
        return float(np.sqrt(np.sum(self.asm.geo.dx * (uq - ue) ** 2)))

    def l2_norm_fe(self, v: np.ndarray) -> float:
        return float(np.sqrt(max(v @ (self.asm.mass @ v), 0.0)))


def run_heat_benchmark(level: int, p: int, n_t: int = 64, J: int = 2, T: float = 1.0,
                       initial: str = "ritz") -> HeatResult:
    """Solve to ``T`` on an icosphere and report the L2 error at ``T``."""
    mesh = build_icosphere(level, p=p)
    solver = HeatSolver(mesh, BenchmarkProblem(T), initial)
    grid = ContourGrid.single(n_t, 0.0, T)
    traj = solver.solve(grid, J)
    err = solver.l2_error_exact(traj[-1], T)
    return HeatResult(mesh.n_nodes, mesh.h_max, n_t, J, err, traj, grid)


def fit_slope(x, y) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


@dataclass
class OrderStudy:
    label: str
    x: list
    errors: list
    n_dof: list
    slope: float
    order: float


def run_spatial_order_study(p: int, levels=(2, 3, 4), n_t: int = 256, J: int = 0) -> OrderStudy:
    """Errors at ``T = 1`` under uniform refinement; order reported in ``h``.

    ``order = -2 * slope`` with respect to ``N_dof`` (two space dimensions).
    """
    errs, ndof = [], []
    for L in levels:
        r = run_heat_benchmark(L, p, n_t=n_t, J=J)
        errs.append(r.error)
        ndof.append(r.n_dof)
    s = fit_slope(ndof, errs)
    return OrderStudy(f"p={p}", list(levels), errs, ndof, s, -2.0 * s)


def run_contour_order_study(J: int, n_ts=None, levels=None, p: int = 3) -> OrderStudy:
    """Error at ``T = 1`` with the mesh refined once per doubling of ``N_t``.

    Defaults: CN on levels 3-5 with ``N_t = 8, 16, 32``; SDC on levels 1-4
    with ``N_t = 8 .. 64``. ``order = -slope`` against ``N_t``.
    """
    if n_ts is None:
        n_ts = (8, 16, 32, 64) if J > 0 else (8, 16, 32)
    if levels is None:
        start = 1 if J > 0 else 3
        levels = tuple(start + i for i in range(len(n_ts)))
    errs, ndof = [], []
    for L, n in zip(levels, n_ts):
        r = run_heat_benchmark(L, p, n_t=n, J=J)
        errs.append(r.error)
        ndof.append(r.n_dof)
    s = fit_slope(n_ts, errs)
    return OrderStudy(f"{'CN' if J == 0 else f'SDC(J={J})'}", list(n_ts), errs, ndof, s, -s)


def fourth_order_weights(t: np.ndarray) -> np.ndarray:
    """Composite weights integrating the local cubic interpolant over each interval.

    Interval ``[t_k, t_k+1]`` uses the four nodes ``t_{k-1} .. t_{k+2}``,
    shifted inwards at the ends of the grid.
    """
    t = np.asarray(t, dtype=float)
    n = len(t) - 1
    if n < 3:
        raise ValueError("need at least four nodes")
    w = np.zeros(n + 1)
    for k in range(n):
        s = min(max(k - 1, 0), n - 3)
        idx = np.arange(s, s + 4)
        a, b = t[k], t[k + 1]
        c = 0.5 * (a + b)
        hsc = 0.5 * (b - a)
        z = (t[idx] - c) / hsc
        V = np.vander(z, 4, increasing=True).T
        moments = np.array([2.0, 0.0, 2.0 / 3.0, 0.0])
        w[idx] += hsc * np.linalg.solve(V, moments)
    return w


@dataclass
class IntegralRow:
    n_t: int
    e_cn: float
    e_sdc: float


def run_contour_integral_study(level: int, n_ts=(8, 16, 32, 64, 128), p: int = 3, J: int = 1,
                               T: float = 1.0) -> list[IntegralRow]:
    """Error of ``int_0^T u_h dt`` for CN + fourth-order rule and SDC + Clenshaw-Curtis.

    The reference is the nodal interpolant of ``int_0^T u dt``; errors are
    L2 norms on the discrete surface.
    """
    mesh = build_icosphere(level, p=p)
    solver = HeatSolver(mesh, BenchmarkProblem(T))
    U_exact = exact_solution(mesh.nodes, 0.0) * (1.0 - np.exp(-T))
    rows = []
    for n in n_ts:
        grid = ContourGrid.single(n, 0.0, T)
        cn = solver.solve(grid, 0)
        U_cn = fourth_order_weights(grid.nodes) @ cn
        sdc = solver.solve(grid, J)
        U_sdc = 0.5 * T * (cc_weights(n) @ sdc)
        rows.append(IntegralRow(n, solver.l2_norm_fe(U_exact - U_cn),
                                solver.l2_norm_fe(U_exact - U_sdc)))
    return rows
