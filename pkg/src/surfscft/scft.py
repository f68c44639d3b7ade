"""Self-consistent field iteration for an AB diblock melt on a surface.

Fields are ``w+`` (pressure) and ``w-`` (exchange), with block fields
``wA = w+ - w-`` and ``wB = w+ + w-``. Lengths are in units of ``R_g`` so
the propagator equation is ``q_t = Lap_M q - w q`` with ``q(., 0) = 1``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .assembly import Assembler
from .contour import PropagatorTrajectory, solve_propagator
from .mesh import SurfaceMesh

log = logging.getLogger(__name__)


class ScftDivergence(ArithmeticError):
    """Non-finite fields or a non-positive partition function."""

    def __init__(self, msg, report=None):
        super().__init__(msg)
        self.report = report


@dataclass(frozen=True)
class ScftParams:
    chi_n: float = 25.0
    f: float = 0.2
    lambda_plus: float = 2.0
    lambda_minus: float = 2.0
    tol_H: float = 1e-6
    tol_residual: float = 1e-8
    max_iter: int = 500
    n_t: int = 200
    J: int = 1
    seed: int = 0

    def __post_init__(self):
        if not self.chi_n > 0:
            raise ValueError("chi_n must be positive")
        if not 0.0 < self.f < 1.0:
            raise ValueError("f must lie in (0, 1)")
        if self.lambda_plus < 0 or self.lambda_minus < 0:
            raise ValueError("field step lengths must be nonnegative")
        if not self.tol_H > 0:
            raise ValueError("tol_H must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass
class FieldState:
    w_plus: np.ndarray
    w_minus: np.ndarray

    def __post_init__(self):
        self.w_plus = np.asarray(self.w_plus, dtype=float)
        self.w_minus = np.asarray(self.w_minus, dtype=float)
        if self.w_plus.shape != self.w_minus.shape:
            raise ValueError("w+ and w- must have the same length")

    @property
    def n_dof(self) -> int:
        return self.w_plus.shape[0]

    @property
    def w_a(self) -> np.ndarray:
        return self.w_plus - self.w_minus

    @property
    def w_b(self) -> np.ndarray:
        return self.w_plus + self.w_minus

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.w_plus)) and np.all(np.isfinite(self.w_minus)))

    def copy(self) -> "FieldState":
        return FieldState(self.w_plus.copy(), self.w_minus.copy())

    @classmethod
    def zeros(cls, n: int) -> "FieldState":
        return cls(np.zeros(n), np.zeros(n))


@dataclass
class DensityState:
    phi_a: np.ndarray
    phi_b: np.ndarray
    Q: float


@dataclass
class IterationRecord:
    iteration: int
    H: float
    Q: float
    incompressibility: float
    exchange: float
    dH: float


@dataclass
class ScftReport:
    records: list[IterationRecord] = field(default_factory=list)
    converged: bool = False
    reason: str = ""

    def __len__(self) -> int:
        return len(self.records)

    @property
    def H(self) -> np.ndarray:
        return np.array([r.H for r in self.records])

    @property
    def Q(self) -> np.ndarray:
        return np.array([r.Q for r in self.records])

    def rows(self) -> list[dict]:
        return [asdict(r) for r in self.records]


def compute_Q(assembler: Assembler, q: PropagatorTrajectory | np.ndarray) -> float:
    """``Q = (1/|M|) int q(x, 1) dx``."""
    q1 = q.at_end() if isinstance(q, PropagatorTrajectory) else np.asarray(q)
    Q = assembler.integrate(q1) / assembler.area
    if not (np.isfinite(Q) and Q > 0.0):
        raise ScftDivergence(f"partition function Q = {Q} is not positive")
    return Q


def compute_densities(q: PropagatorTrajectory, qdag: PropagatorTrajectory, Q: float,
                      f: float) -> DensityState:
    """Block densities ``(1/Q) int q(x, t) q^dagger(x, 1 - t) dt`` by panel.

    Forward panel 0 is ``[0, f]`` and pairs with backward panel 1
    ``[1 - f, 1]`` traversed in reverse; the Clenshaw-Curtis nodes of the two
    coincide under ``t -> 1 - t`` when their interval counts agree.
    """
    from .contour import clenshaw_curtis_integrate

    g, gd = q.grid, qdag.grid
    if len(g.panels) != 2 or len(gd.panels) != 2:
        raise ValueError("density integrals need two-panel grids")
    pa, pb = g.panels
    da, db = gd.panels
    if pa.n != db.n or pb.n != da.n:
        raise ValueError("forward and backward grids are not mirror images")
    if abs(pa.b - f) > 1e-15 or abs(da.b - (1.0 - f)) > 1e-15:
        raise ValueError("grid breakpoints do not match the block fraction")
    qa = q.panel(0) * qdag.panel(1)[::-1]
    qb = q.panel(1) * qdag.panel(0)[::-1]
    phi_a = clenshaw_curtis_integrate(qa, pa.a, pa.b) / Q
    phi_b = clenshaw_curtis_integrate(qb, pb.a, pb.b) / Q
    return DensityState(phi_a, phi_b, Q)


def compute_hamiltonian(assembler: Assembler, fields: FieldState, Q: float, chi_n: float) -> float:
    """``H = (1/|M|) int (-w+ + w-^2 / chiN) dx - log Q``."""
    if not Q > 0.0:
        raise ScftDivergence(f"cannot take log of Q = {Q}")
    wm = fields.w_minus
    energy = -assembler.integrate(fields.w_plus) + float(wm @ (assembler.mass @ wm)) / chi_n
    return energy / assembler.area - math.log(Q)


def residuals(fields: FieldState, dens: DensityState, chi_n: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodal mean-field residuals ``phiA + phiB - 1`` and ``2 w-/chiN - (phiA - phiB)``."""
    inc = dens.phi_a + dens.phi_b - 1.0
    exch = 2.0 * fields.w_minus / chi_n - (dens.phi_a - dens.phi_b)
    return inc, exch


def update_fields(fields: FieldState, dens: DensityState, params: ScftParams) -> FieldState:
    """One explicit Euler step towards the saddle point."""
    with np.errstate(invalid="ignore", over="ignore"):
        inc, exch = residuals(fields, dens, params.chi_n)
        out = FieldState(fields.w_plus + params.lambda_plus * inc,
                         fields.w_minus - params.lambda_minus * exch)
    if not out.is_finite():
        raise ScftDivergence("field update produced non-finite values")
    return out


@dataclass
class ScftSnapshot:
    """Everything computed in one iteration from the incoming fields."""

    fields: FieldState
    q: PropagatorTrajectory
    qdag: PropagatorTrajectory
    densities: DensityState
    H: float


def evaluate(assembler: Assembler, fields: FieldState, params: ScftParams) -> ScftSnapshot:
    """Propagators, densities and Hamiltonian for the given fields."""
    q = solve_propagator("forward", fields.w_plus, fields.w_minus, params.f, assembler,
                         n_total=params.n_t, J=params.J)
    qdag = solve_propagator("backward", fields.w_plus, fields.w_minus, params.f, assembler,
                            n_total=params.n_t, J=params.J)
    Q = compute_Q(assembler, q)
    dens = compute_densities(q, qdag, Q, params.f)
    H = compute_hamiltonian(assembler, fields, Q, params.chi_n)
    return ScftSnapshot(fields, q, qdag, dens, H)


StopHook = Callable[[int, ScftSnapshot], bool]


@dataclass
class ScftResult:
    fields: FieldState
    densities: DensityState
    report: ScftReport
    snapshot: ScftSnapshot
    stopped_by_hook: bool = False


def scft_solve(mesh: SurfaceMesh | Assembler, params: ScftParams, fields: FieldState | None = None,
               hook: StopHook | None = None, H_previous: float | None = None,
               callback: Callable[[IterationRecord, ScftSnapshot], None] | None = None) -> ScftResult:
    """Iterate propagators, observables and field updates to a saddle point.

    Stops when ``|H_k - H_{k-1}| < tol_H`` or when both nodal residuals are
    below ``tol_residual`` in max norm. ``hook(k, snapshot)`` may end the loop
    early (used to trigger mesh adaptation); the fields returned are always
    those the last snapshot was computed from, so observables and fields are
    consistent.
    """
    asm = mesh if isinstance(mesh, Assembler) else Assembler(mesh)
    if fields is None:
        fields = FieldState.zeros(asm.n_dof)
    if fields.n_dof != asm.n_dof:
        raise ValueError(f"fields have {fields.n_dof} entries, mesh has {asm.n_dof} DOFs")
    report = ScftReport()
    H_prev = H_previous
    snap = None
    for k in range(1, params.max_iter + 1):
        try:
            snap = evaluate(asm, fields, params)
        except ScftDivergence as exc:
            exc.report = report
            raise
        inc, exch = residuals(fields, snap.densities, params.chi_n)
        r_inc = float(np.abs(inc).max())
        r_exch = float(np.abs(exch).max())
        dH = math.inf if H_prev is None else abs(snap.H - H_prev)
        rec = IterationRecord(k, snap.H, snap.densities.Q, r_inc, r_exch, dH)
        report.records.append(rec)
        if callback is not None:
            callback(rec, snap)
        log.debug("iter %d H=%.9f Q=%.6e inc=%.2e exch=%.2e dH=%.2e", k, snap.H,
                  snap.densities.Q, r_inc, r_exch, dH)
        if max(r_inc, r_exch) < params.tol_residual:
            report.converged, report.reason = True, "residual"
            break
        if dH < params.tol_H:
            report.converged, report.reason = True, "dH"
            break
        if hook is not None and hook(k, snap):
            report.reason = "hook"
            return ScftResult(fields, snap.densities, report, snap, stopped_by_hook=True)
        H_prev = snap.H
        if k == params.max_iter:
            report.reason = "max_iter"
            break
        try:
            fields = update_fields(fields, snap.densities, params)
        except ScftDivergence as exc:
            exc.report = report
            raise
    return ScftResult(fields, snap.densities, report, snap)


# --- initial fields -------------------------------------------------------

def icosahedral_directions() -> np.ndarray:
    t = (1.0 + 5.0**0.5) / 2.0
    v = np.array([[-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
                  [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
                  [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1]], dtype=float)
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _fields_from_phi(phi: np.ndarray, chi_n: float, amplitude: float) -> FieldState:
    """``w- = amplitude (chiN/2)(2 phi - 1)`` and ``w+ = 0``."""
    return FieldState(np.zeros_like(phi), amplitude * 0.5 * chi_n * (2.0 * phi - 1.0))


def spot_fields(nodes: np.ndarray, chi_n: float, f: float, width: float = 0.3,
                amplitude: float = 1.0, directions: np.ndarray | None = None) -> FieldState:
    """Twelve A-rich caps centred on icosahedral directions, total area fraction ``f``.

    Distances are great-circle distances on the sphere through each node's
    direction; ``width`` is the tanh interface width in units of ``R_g``.
    """
    dirs = icosahedral_directions() if directions is None else np.asarray(directions, float)
    r = np.linalg.norm(nodes, axis=1)
    R = float(np.mean(r))
    u = nodes / r[:, None]
    # cap of area f |S| / n_caps: 2 pi R^2 (1 - cos a) = 4 pi R^2 f / n
    a = np.arccos(1.0 - 2.0 * f / len(dirs))
    d = R * np.arccos(np.clip(u @ dirs.T, -1.0, 1.0))
    phi = np.clip(np.sum(0.5 * (1.0 - np.tanh((d - R * a) / width)), axis=1), 0.0, 1.0)
    return _fields_from_phi(phi, chi_n, amplitude)


def stripe_fields(nodes: np.ndarray, chi_n: float, f: float, n_stripes: int = 3,
                  axis: int = 2, amplitude: float = 1.0) -> FieldState:
    """Bands ``phi = f + (1/2) cos(pi n_stripes s)`` along one coordinate, ``s`` in ``[-1, 1]``."""
    x = nodes[:, axis]
    span = max(np.abs(x).max(), 1e-300)
    phi = np.clip(f + 0.5 * np.cos(np.pi * n_stripes * x / span), 0.0, 1.0)
    return _fields_from_phi(phi, chi_n, amplitude)


def random_fields(n: int, chi_n: float, seed: int = 0, scale: float = 0.5) -> FieldState:
    """``w-`` uniform in ``[-scale, scale] chiN`` with a fixed seed, ``w+ = 0``."""
    rng = np.random.default_rng(seed)
    return FieldState(np.zeros(n), chi_n * rng.uniform(-scale, scale, size=n))


def initial_fields(kind: str, mesh: SurfaceMesh, params: ScftParams, **kw) -> FieldState:
    kind = kind.lower()
    if kind == "zero":
        return FieldState.zeros(mesh.n_nodes)
    if kind == "spots":
        return spot_fields(mesh.nodes, params.chi_n, params.f, **kw)
    if kind == "stripes":
        return stripe_fields(mesh.nodes, params.chi_n, params.f, **kw)
    if kind == "random":
        return random_fields(mesh.n_nodes, params.chi_n, seed=params.seed, **kw)
    raise ValueError(f"unknown field initialisation {kind!r}")
