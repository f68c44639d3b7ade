"""Command-line driver: benchmark studies and SCFT runs writing CSV and VTK files.

Exit status is 0 on success, 2 for configuration errors and 3 for numerical
failures.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

log = logging.getLogger("surfscft")

FLAG_MAP = {
    "surface": "surface.name",
    "p": "mesh.p",
    "level": "mesh.level",
    "nt": "contour.n_t",
    "sdc": "contour.J",
    "chi_n": "scft.chi_n",
    "f": "scft.f",
    "theta": "adapt.theta",
    "seed": "scft.seed",
    "out": "output.dir",
    "threads": "output.threads",
    "init": "scft.init",
    "max_iter": "scft.max_iter",
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="surfscft", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("heat-order", "contour-order", "contour-integral", "scft", "scft-adaptive",
                 "continue"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path)
        sp.add_argument("--surface")
        sp.add_argument("--p", type=int)
        sp.add_argument("--level", type=int)
        sp.add_argument("--nt", type=int)
        sp.add_argument("--sdc", type=int, metavar="J")
        sp.add_argument("--chi-n", dest="chi_n", type=float)
        sp.add_argument("--f", type=float)
        sp.add_argument("--theta", type=float)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", type=Path)
        sp.add_argument("--threads", type=int)
        sp.add_argument("--init", help="spots | stripes | random | zero")
        sp.add_argument("--max-iter", dest="max_iter", type=int)
        sp.add_argument("-v", "--verbose", action="count", default=0)
    return ap


def _limit_threads(n: int) -> None:
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(n)


def _make_mesh(cfg):
    from .mesh import build_icosphere, build_parametric_patch
    from .surface import ExpressionSurface, make_surface

    s, m = cfg.surface, cfg.mesh
    if s.name == "sphere":
        return build_icosphere(m.level, radius=s.radius, p=m.p)
    if s.name == "expression":
        surf = ExpressionSurface(s.expression, radius=s.radius, closed=s.closed)
        if not s.closed:
            raise ValueError("open expression surfaces have no mesh generator")
        return build_icosphere(m.level, radius=s.radius, p=m.p, surface=surf)
    surf = make_surface(s.name, rect=tuple(s.rect), a=s.a)
    return build_parametric_patch(surf, resolution=m.resolution, p=m.p)


def _params(cfg, chi_n=None):
    from .scft import ScftParams

    c = cfg.scft
    return ScftParams(chi_n=chi_n if chi_n is not None else c.chi_n, f=c.f,
                      lambda_plus=c.lambda_plus, lambda_minus=c.lambda_minus, tol_H=c.tol_H,
                      tol_residual=c.tol_residual, max_iter=c.max_iter, n_t=cfg.contour.n_t,
                      J=cfg.contour.J, seed=c.seed)


def _adapt_params(cfg):
    from .adaptivity import AdaptParams

    a = cfg.adapt
    return AdaptParams(theta=a.theta, clamp=a.clamp, h_floor=a.h_floor or None,
                       e_ref_trigger=a.e_ref_trigger, steps_per_cycle=a.steps_per_cycle,
                       min_steps=a.min_steps, max_cycles=a.max_cycles, tol_H=cfg.scft.tol_H)


def _initial(cfg, mesh, params):
    from .scft import initial_fields

    kw = {}
    if cfg.scft.init in ("spots", "stripes"):
        kw["amplitude"] = cfg.scft.amplitude
    return initial_fields(cfg.scft.init, mesh, params, **kw)


def _snapshot(out: Path, index: int, mesh, fields, dens, cell_data=None):
    from .vtkio import write_vtk

    write_vtk(out / f"fields_{index:04d}.vtk", mesh,
              {"w_plus": fields.w_plus, "w_minus": fields.w_minus,
               "phi_a": dens.phi_a, "phi_b": dens.phi_b},
              cell_data)


def _iteration_row(rec, **extra) -> dict:
    row = dict(extra)
    row.update(iteration=rec.iteration, H=rec.H, Q=rec.Q,
               incompressibility=rec.incompressibility, exchange=rec.exchange, dH=rec.dH)
    return row


def cmd_scft(cfg, out: Path) -> int:
    from .assembly import Assembler
    from .scft import scft_solve
    from .vtkio import write_csv

    mesh = _make_mesh(cfg)
    params = _params(cfg)
    fields = _initial(cfg, mesh, params)
    asm = Assembler(mesh)
    cadence = cfg.output.cadence
    rows = []

    def cb(rec, snap):
        rows.append(_iteration_row(rec))
        if cadence and rec.iteration % cadence == 0:
            _snapshot(out, rec.iteration, mesh, snap.fields, snap.densities)

    res = scft_solve(asm, params, fields, callback=cb)
    write_csv(out / "iterations.csv", rows)
    last = res.report.records[-1]
    _snapshot(out, len(res.report), mesh, res.snapshot.fields, res.densities)
    write_csv(out / "summary.csv", [dict(
        mode="scft", chi_n=params.chi_n, f=params.f, n_dof=asm.n_dof, h_min=mesh.h_min,
        iterations=len(res.report), H=last.H, Q=last.Q, converged=res.report.converged,
        reason=res.report.reason, incompressibility=last.incompressibility,
        exchange=last.exchange)])
    log.info("H = %.8f  Q = %.6e  after %d iterations (%s)", last.H, last.Q, len(res.report),
             res.report.reason)
    return EXIT_OK


def _run_adaptive(cfg, out: Path, mesh, params, fields, tag: str, it_rows, cycle_rows, counter):
    from .adaptivity import adaptive_scft, element_estimator

    def on_iter(cycle, n, rec, snap):
        it_rows.append(_iteration_row(rec, chi_n=params.chi_n, cycle=cycle, n_dof=n))

    def on_cycle(rec, m, res):
        row = dict(chi_n=params.chi_n)
        row.update(rec.__dict__)
        cycle_rows.append(row)
        err = element_estimator(m, res.snapshot.q.at_end(), res.snapshot.qdag.at_end())
        counter[0] += 1
        _snapshot(out, counter[0], m, res.snapshot.fields, res.snapshot.densities,
                  {"estimator": err.values, "generation": m.generations.astype(float)})

    return adaptive_scft(mesh, params, fields, _adapt_params(cfg), on_cycle=on_cycle,
                         on_iteration=on_iter)


def _summary_row(mode, params, ad) -> dict:
    last = ad.result.report.records[-1]
    total = len(ad.iterations)
    return dict(mode=mode, chi_n=params.chi_n, f=params.f, n_dof=ad.mesh.n_nodes,
                h_min=ad.mesh.h_min, n_uniform=ad.mesh.matched_uniform_nodes(),
                dof_ratio=ad.mesh.n_nodes / ad.mesh.matched_uniform_nodes(), iterations=total,
                cycles=len(ad.cycles), H=last.H, Q=last.Q, converged=ad.converged,
                incompressibility=last.incompressibility, exchange=last.exchange)


def cmd_scft_adaptive(cfg, out: Path) -> int:
    from .vtkio import write_csv

    mesh = _make_mesh(cfg)
    params = _params(cfg)
    fields = _initial(cfg, mesh, params)
    it_rows, cyc_rows, counter = [], [], [0]
    ad = _run_adaptive(cfg, out, mesh, params, fields, "adaptive", it_rows, cyc_rows, counter)
    write_csv(out / "iterations.csv", it_rows)
    write_csv(out / "cycles.csv", cyc_rows)
    write_csv(out / "summary.csv", [_summary_row("scft-adaptive", params, ad)])
    return EXIT_OK


def cmd_continue(cfg, out: Path) -> int:
    """Adaptive runs over ``chi_n_list``, each started from the previous converged fields."""
    from .vtkio import write_csv

    mesh = _make_mesh(cfg)
    it_rows, cyc_rows, summary, counter = [], [], [], [0]
    fields = None
    for chi in cfg.scft.chi_n_list:
        params = _params(cfg, chi_n=chi)
        if fields is None:
            fields = _initial(cfg, mesh, params)
        ad = _run_adaptive(cfg, out, mesh, params, fields, f"chi{chi:g}", it_rows, cyc_rows,
                           counter)
        summary.append(_summary_row("continue", params, ad))
        mesh, fields = ad.mesh, ad.fields
    write_csv(out / "iterations.csv", it_rows)
    write_csv(out / "cycles.csv", cyc_rows)
    write_csv(out / "summary.csv", summary)
    return EXIT_OK


def cmd_heat_order(cfg, out: Path) -> int:
    from .benchmarks import run_spatial_order_study
    from .vtkio import write_csv

    L0 = cfg.mesh.level
    levels = (L0, L0 + 1, L0 + 2)
    J = cfg.contour.J
    st = run_spatial_order_study(cfg.mesh.p, levels, n_t=cfg.contour.n_t, J=J)
    rows = [dict(p=cfg.mesh.p, level=L, n_dof=n, n_t=cfg.contour.n_t, J=J, error=e)
            for L, n, e in zip(levels, st.n_dof, st.errors)]
    write_csv(out / "iterations.csv", rows)
    write_csv(out / "summary.csv", [dict(study="spatial", p=cfg.mesh.p, order=st.order)])
    log.info("p=%d spatial order %.3f", cfg.mesh.p, st.order)
    return EXIT_OK


def cmd_contour_order(cfg, out: Path) -> int:
    from .benchmarks import run_contour_order_study
    from .vtkio import write_csv

    rows, summ = [], []
    for J in (0, cfg.contour.J or 1):
        st = run_contour_order_study(J, p=cfg.mesh.p)
        rows += [dict(scheme=st.label, n_t=n, n_dof=d, error=e)
                 for n, d, e in zip(st.x, st.n_dof, st.errors)]
        summ.append(dict(study="contour", scheme=st.label, order=st.order))
        log.info("%s contour order %.3f", st.label, st.order)
    write_csv(out / "iterations.csv", rows)
    write_csv(out / "summary.csv", summ)
    return EXIT_OK


def cmd_contour_integral(cfg, out: Path) -> int:
    from .benchmarks import run_contour_integral_study
    from .vtkio import write_csv

    rows = run_contour_integral_study(cfg.mesh.level, p=cfg.mesh.p, J=cfg.contour.J or 1)
    write_csv(out / "summary.csv", [r.__dict__ for r in rows])
    for r in rows:
        log.info("N_t=%4d  e_CN=%.3e  e_SDC=%.3e", r.n_t, r.e_cn, r.e_sdc)
    return EXIT_OK


COMMANDS = {
    "scft": cmd_scft,
    "scft-adaptive": cmd_scft_adaptive,
    "continue": cmd_continue,
    "heat-order": cmd_heat_order,
    "contour-order": cmd_contour_order,
    "contour-integral": cmd_contour_integral,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose + 1, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads:
        _limit_threads(args.threads)
    from .config import ConfigError, load_config

    overrides = {"mode": args.command}
    for flag, dotted in FLAG_MAP.items():
        v = getattr(args, flag, None)
        if v is not None:
            overrides[dotted] = str(v)
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg.write(out / "config.ini")

    from .assembly import SolverError
    from .mesh import DegenerateElementError
    from .scft import ScftDivergence
    from .surface import ProjectionError

    try:
        return COMMANDS[args.command](cfg, out)
    except (ScftDivergence, SolverError, ProjectionError, DegenerateElementError,
            FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
