"""Legacy ASCII VTK output of curved meshes and a matching reader; CSV rows.

Elements of degree 1, 2 and 3 are written as VTK cell types 5 (triangle),
22 (quadratic triangle) and 69 (Lagrange triangle). VTK orders nodes as
vertices, then edge nodes along edges 0-1, 1-2, 2-0, then interior nodes.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .reference_element import enumerate_multi_indices

VTK_TRIANGLE = 5
VTK_QUADRATIC_TRIANGLE = 22
VTK_LAGRANGE_TRIANGLE = 69


def vtk_permutation(p: int) -> np.ndarray:
    """Indices into our basis order giving the VTK node order for degree ``p``."""
    if p not in (1, 2, 3):
        raise ValueError(f"VTK export supports degrees 1-3, got {p}")
    pos = {tuple(m): i for i, m in enumerate(enumerate_multi_indices(p))}
    order = [pos[(p, 0, 0)], pos[(0, p, 0)], pos[(0, 0, p)]]
    for k in range(1, p):
        order.append(pos[(p - k, k, 0)])
    for k in range(1, p):
        order.append(pos[(0, p - k, k)])
    for k in range(1, p):
        order.append(pos[(k, 0, p - k)])
    if p == 3:
        order.append(pos[(1, 1, 1)])
    return np.array(order)


def _cell_type(p: int) -> int:
    return {1: VTK_TRIANGLE, 2: VTK_QUADRATIC_TRIANGLE, 3: VTK_LAGRANGE_TRIANGLE}[p]


def _fmt(a: np.ndarray) -> str:
    return "\n".join(" ".join(repr(float(v)) for v in row) for row in np.atleast_2d(a))


def write_vtk(path, mesh, point_data: dict | None = None, cell_data: dict | None = None,
              title: str = "surface field") -> Path:
    """Write ``mesh`` with nodal and per-element scalars to a legacy ``.vtk`` file."""
    path = Path(path)
    p = mesh.degree
    perm = vtk_permutation(p)
    conn = np.asarray(mesh.elem_nodes)[:, perm]
    pts = np.asarray(mesh.nodes)
    lines = ["# vtk DataFile Version 4.2", title.replace("\n", " ")[:255], "ASCII",
             "DATASET UNSTRUCTURED_GRID", f"POINTS {len(pts)} double", _fmt(pts)]
    ne, n_p = conn.shape
    lines.append(f"CELLS {ne} {ne * (n_p + 1)}")
    lines.append("\n".join(f"{n_p} " + " ".join(map(str, row)) for row in conn))
    lines.append(f"CELL_TYPES {ne}")
    lines.append("\n".join([str(_cell_type(p))] * ne))
    if point_data:
        lines.append(f"POINT_DATA {len(pts)}")
        for name, v in point_data.items():
            v = np.asarray(v, dtype=float)
            if v.shape != (len(pts),):
                raise ValueError(f"point field {name!r} has shape {v.shape}")
            lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default", _fmt(v[:, None])]
    if cell_data:
        lines.append(f"CELL_DATA {ne}")
        for name, v in cell_data.items():
            v = np.asarray(v, dtype=float)
            if v.shape != (ne,):
                raise ValueError(f"cell field {name!r} has shape {v.shape}")
            lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default", _fmt(v[:, None])]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_vtk(path) -> dict:
    """Parse a legacy ASCII unstructured grid written by :func:`write_vtk`.

    Returns ``points``, ``cells`` (list of index arrays), ``cell_types``,
    ``point_data`` and ``cell_data``.
    """
    tokens = Path(path).read_text().split("\n")
    if not tokens[0].startswith("# vtk DataFile"):
        raise ValueError("not a legacy VTK file")
    if tokens[2].strip() != "ASCII":
        raise ValueError("only ASCII files are supported")
    words = " ".join(tokens[3:]).split()
    out = {"points": None, "cells": [], "cell_types": None, "point_data": {}, "cell_data": {}}
    i = 0
    section = None

    def take(n, kind=float):
        nonlocal i
        vals = np.array(words[i:i + n], dtype=kind)
        i += n
        return vals

    while i < len(words):
        w = words[i].upper()
        if w == "DATASET":
            if words[i + 1].upper() != "UNSTRUCTURED_GRID":
                raise ValueError("expected UNSTRUCTURED_GRID")
            i += 2
        elif w == "POINTS":
            n = int(words[i + 1])
            i += 3
            out["points"] = take(3 * n).reshape(n, 3)
        elif w == "CELLS":
            n, size = int(words[i + 1]), int(words[i + 2])
            i += 3
            flat = take(size, int)
            cells, j = [], 0
            for _ in range(n):
                k = flat[j]
                cells.append(flat[j + 1:j + 1 + k])
                j += k + 1
            out["cells"] = cells
        elif w == "CELL_TYPES":
            n = int(words[i + 1])
            i += 2
            out["cell_types"] = take(n, int)
        elif w in ("POINT_DATA", "CELL_DATA"):
            section = (w, int(words[i + 1]))
            i += 2
        elif w == "SCALARS":
            name = words[i + 1]
            if i + 3 < len(words) and words[i + 3].isdigit():
                ncomp = int(words[i + 3])
                i += 4
            else:
                ncomp = 1
                i += 3
            if words[i].upper() == "LOOKUP_TABLE":
                i += 2
            kind, n = section
            key = "point_data" if kind == "POINT_DATA" else "cell_data"
            out[key][name] = take(n * ncomp)
        else:
            raise ValueError(f"unexpected token {words[i]!r}")
    return out


def write_csv(path, rows: list[dict], fieldnames: list[str] | None = None) -> Path:
    """Write dict rows with a header; floats keep full precision."""
    path = Path(path)
    if fieldnames is None:
        fieldnames = list(rows[0].keys()) if rows else []
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fieldnames, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v)
                        for k, v in r.items()})
    return path


def read_csv(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))
