"""Gradient-recovery error estimation, Log marking and the adaptive SCFT driver."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .assembly import Assembler
from .mesh import AdaptReport, SurfaceMesh, TransferReport, coarsen, compute_geometry, refine, \
    transfer_field
from .scft import FieldState, ScftParams, ScftResult, ScftSnapshot, scft_solve

log = logging.getLogger(__name__)


def element_gradients_at_nodes(mesh: SurfaceMesh, u: np.ndarray) -> np.ndarray:
    """Elementwise tangential gradient of ``u`` at each element's own nodes, (ne, n_p, 3)."""
    basis = mesh.basis
    X = mesh.nodes[mesh.elem_nodes]
    _, dphi, _, jac, _, inv, _ = compute_geometry(X, basis, basis.lattice_points)
    ref = np.einsum("ea,aqk->eqk", np.asarray(u)[mesh.elem_nodes], dphi)
    return np.einsum("eqik,eqkl,eql->eqi", jac, inv, ref)


def recover_gradient(mesh: SurfaceMesh, u: np.ndarray) -> np.ndarray:
    """Harmonic-average recovered gradient at every node, (n_nodes, 3).

    ``G u(x_i) = sum_j |tau_j|^{-1} grad u|_{tau_j}(x_i) / sum_j |tau_j|^{-1}``
    over the elements ``tau_j`` containing node ``x_i``.
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (mesh.n_nodes,):
        raise ValueError(f"field has shape {u.shape}, expected ({mesh.n_nodes},)")
    grads = element_gradients_at_nodes(mesh, u)
    w = 1.0 / mesh.element_areas
    en = mesh.elem_nodes
    n = mesh.n_nodes
    wsum = np.bincount(en.ravel(), weights=np.repeat(w, en.shape[1]), minlength=n)
    if np.any(wsum == 0.0):
        raise ValueError(f"node {int(np.flatnonzero(wsum == 0.0)[0])} has no incident element")
    out = np.empty((n, 3))
    wg = grads * w[:, None, None]
    for i in range(3):
        out[:, i] = np.bincount(en.ravel(), weights=wg[..., i].ravel(), minlength=n)
    out /= wsum[:, None]
    # gradients at solver round-off of a constant field are zero
    noise = 1e-10 * float(np.abs(u).max()) / mesh.h_min
    out[np.linalg.norm(out, axis=1) <= noise] = 0.0
    return out


def recovered_norms(mesh: SurfaceMesh, u: np.ndarray, rule=None) -> np.ndarray:
    """``||G u||_tau`` for every element, with ``G u`` interpolated from its nodal values."""
    G = recover_gradient(mesh, u)
    geo = mesh.geometry(rule)
    Gq = np.einsum("eai,aq->eqi", G[mesh.elem_nodes], geo.phi)
    return np.sqrt(np.einsum("eq,eqi,eqi->e", geo.dx, Gq, Gq))


@dataclass(frozen=True)
class ErrorField:
    values: np.ndarray

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    @property
    def std(self) -> float:
        return float(np.std(self.values))

    @property
    def min(self) -> float:
        return float(np.min(self.values))

    @property
    def max(self) -> float:
        return float(np.max(self.values))

    def __len__(self) -> int:
        return len(self.values)


def element_estimator(mesh: SurfaceMesh, q_final: np.ndarray, qdag_final: np.ndarray) -> ErrorField:
    """``e_tau = (||G q(., 1)||_tau + ||G q^dagger(., 1)||_tau) / 2``."""
    e = 0.5 * (recovered_norms(mesh, q_final) + recovered_norms(mesh, qdag_final))
    return ErrorField(e)


@dataclass(frozen=True)
class MarkingPlan:
    counts: np.ndarray
    theta: float
    clamp: int

    @property
    def n_refine(self) -> int:
        return int(np.sum(self.counts > 0))

    @property
    def n_coarsen(self) -> int:
        return int(np.sum(self.counts < 0))

    def is_empty(self) -> bool:
        return not np.any(self.counts)


def log_mark(errors: ErrorField | np.ndarray, theta: float = 1.0, clamp: int = 2) -> MarkingPlan:
    """``n_tau = [log2(e_tau / (theta ebar))]`` rounded to nearest, clamped to ``+-clamp``.

    Elements with ``e_tau = 0`` get ``-clamp``; an all-zero error field gives an
    empty plan.
    """
    if theta <= 0:
        raise ValueError("theta must be positive")
    e = errors.values if isinstance(errors, ErrorField) else np.asarray(errors, dtype=float)
    ebar = float(np.mean(e)) if e.size else 0.0
    if ebar <= 0.0:
        return MarkingPlan(np.zeros(e.shape, dtype=np.int64), theta, clamp)
    with np.errstate(divide="ignore"):
        ratio = np.log2(e / (theta * ebar))
    n = np.floor(ratio + 0.5)
    n[e == 0.0] = -clamp
    n = np.clip(n, -clamp, clamp).astype(np.int64)
    return MarkingPlan(n, theta, clamp)


def reference_estimator(errors: ErrorField | np.ndarray) -> float:
    """``sigma(e) / (max e - min e)``, or 0 when every element has the same error."""
    e = errors.values if isinstance(errors, ErrorField) else np.asarray(errors, dtype=float)
    span = float(e.max() - e.min())
    if span <= 0.0:
        return 0.0
    return float(np.std(e)) / span


@dataclass(frozen=True)
class AdaptParams:
    theta: float = 1.0
    clamp: int = 2
    h_floor: float | None = None
    e_ref_trigger: float = 0.1
    steps_per_cycle: int = 500
    min_steps: int = 20
    max_cycles: int = 12
    tol_H: float = 1e-6
    min_generation: int | None = None


@dataclass
class CycleRecord:
    cycle: int
    n_dof_before: int
    n_dof_after: int
    h_min: float
    e_ref: float
    H: float
    Q: float
    iterations: int
    n_uniform: int
    refined: int = 0
    coarsened: int = 0


@dataclass
class AdaptiveResult:
    mesh: SurfaceMesh
    fields: FieldState
    result: ScftResult
    cycles: list[CycleRecord] = field(default_factory=list)
    iterations: list = field(default_factory=list)
    converged: bool = False


def adapt_cycle(mesh: SurfaceMesh, fields: FieldState, snapshot: ScftSnapshot,
                params: AdaptParams, min_generation: int = 0):
    """Estimate, mark, refine/coarsen and transfer the fields to the new mesh.

    Returns ``(new_mesh, new_fields, plan, AdaptReport, errors)``.
    """
    errors = element_estimator(mesh, snapshot.q.at_end(), snapshot.qdag.at_end())
    plan = log_mark(errors, params.theta, params.clamp)
    rep = AdaptReport()
    if plan.is_empty():
        return mesh, fields, plan, rep, errors
    ids = mesh.active
    up = {int(t): int(c) for t, c in zip(ids, plan.counts) if c > 0}
    down = {int(t): int(c) for t, c in zip(ids, plan.counts) if c < 0}
    new = refine(mesh, up, h_floor=params.h_floor, report=rep) if up else mesh
    alive = set(new.active.tolist())
    down = {t: c for t, c in down.items() if t in alive}
    if down:
        new = coarsen(new, down, report=rep, min_generation=min_generation)
    if new is mesh:
        return mesh, fields, plan, rep, errors
    tr = TransferReport()
    wp = transfer_field(mesh, fields.w_plus, new, report=tr)
    wm = transfer_field(mesh, fields.w_minus, new, report=tr)
    return new, FieldState(wp, wm), plan, rep, errors


def adaptive_scft(mesh: SurfaceMesh, params: ScftParams, fields: FieldState,
                  adapt: AdaptParams = AdaptParams(),
                  on_cycle: Callable[[CycleRecord, SurfaceMesh, ScftResult], None] | None = None,
                  on_iteration=None) -> AdaptiveResult:
    """Solve, estimate, mark, adapt and repeat until ``H`` settles across cycles.

    Each SCFT stage runs until ``|dH| < tol_H``, ``steps_per_cycle``
    iterations, or (after ``min_steps``) the reference estimator drops below
    ``e_ref_trigger``. The loop ends when a converged stage changes ``H`` by
    less than ``adapt.tol_H`` relative to the previous stage, when the mesh
    no longer changes, or after ``max_cycles`` adaptations.
    """
    floor = adapt.min_generation
    if floor is None:
        floor = int(mesh.generations.min())
    stage_params = ScftParams(**{**params.__dict__, "max_iter": adapt.steps_per_cycle})
    out = AdaptiveResult(mesh, fields, None)
    H_stage_prev = None
    for cycle in range(adapt.max_cycles + 1):
        asm = Assembler(mesh)
        e_ref_box = {"value": math.nan}

        def hook(k, snap, mesh=mesh):
            if k < adapt.min_steps:
                return False
            err = element_estimator(mesh, snap.q.at_end(), snap.qdag.at_end())
            e_ref_box["value"] = reference_estimator(err)
            return e_ref_box["value"] < adapt.e_ref_trigger

        def cb(rec, snap, cycle=cycle, n=asm.n_dof):
            out.iterations.append((cycle, n, rec))
            if on_iteration is not None:
                on_iteration(cycle, n, rec, snap)

        res = scft_solve(asm, stage_params, fields, hook=hook if cycle < adapt.max_cycles else None,
                         callback=cb)
        H = res.snapshot.H
        settled = (res.report.converged and H_stage_prev is not None
                   and abs(H - H_stage_prev) < adapt.tol_H)
        last = cycle == adapt.max_cycles
        if settled or last:
            err = element_estimator(mesh, res.snapshot.q.at_end(), res.snapshot.qdag.at_end())
            rec = CycleRecord(cycle, asm.n_dof, asm.n_dof, mesh.h_min, reference_estimator(err),
                              H, res.snapshot.densities.Q, len(res.report),
                              mesh.matched_uniform_nodes())
            out.cycles.append(rec)
            if on_cycle is not None:
                on_cycle(rec, mesh, res)
            out.mesh, out.fields, out.result = mesh, res.fields, res
            out.converged = settled
            return out
        H_stage_prev = H if res.report.converged else None
        new, new_fields, plan, rep, err = adapt_cycle(mesh, res.fields, res.snapshot, adapt, floor)
        rec = CycleRecord(cycle, asm.n_dof, new.n_nodes, new.h_min, reference_estimator(err), H,
                          res.snapshot.densities.Q, len(res.report), new.matched_uniform_nodes(),
                          rep.refined, rep.coarsened)
        out.cycles.append(rec)
        if on_cycle is not None:
            on_cycle(rec, mesh, res)
        log.info("cycle %d: %d -> %d DOFs, H=%.8f, e_ref=%.3f", cycle, asm.n_dof, new.n_nodes, H,
                 rec.e_ref)
        if new is mesh and res.report.converged:
            out.mesh, out.fields, out.result = mesh, res.fields, res
            out.converged = True
            return out
        mesh, fields = new, new_fields
    raise AssertionError("unreachable")
