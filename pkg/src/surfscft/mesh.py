"""Curved triangulations of degree ``p`` on level-set surfaces.

A :class:`Forest` owns every triangle ever created on a surface: the root
triangles and all their red (four-way) and green (bisection) children. It
only grows, so a :class:`SurfaceMesh`, which is just a set of active forest
triangles plus a polynomial degree, is an immutable snapshot. Refinement and
coarsening return new meshes that share the forest.

Every forest triangle also carries the barycentric coordinates of its three
vertices with respect to its root triangle. Children tile their parent
exactly in these coordinates, which makes point location between two meshes
of the same forest a purely combinatorial walk.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np

from .reference_element import (
    ShapeBasis,
    TriangleQuadratureRule,
    barycentric,
    gauss_rule,
    shape_basis,
)
from .surface import LevelSetSurface, Sphere

ROOT, RED, GREEN = 0, 1, 2


class DegenerateElementError(RuntimeError):
    pass


def _key(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


class Forest:
    """Append-only registry of vertices and triangles on one surface."""

    def __init__(self, surface: LevelSetSurface, vertices: np.ndarray, triangles: np.ndarray):
        self.surface = surface
        vertices = np.asarray(vertices, dtype=float)
        self._coords = np.empty((max(64, 2 * len(vertices)), 3))
        self._coords[: len(vertices)] = vertices
        self.n_vertices = len(vertices)
        self.tri: list[tuple[int, int, int]] = []
        self.parent: list[int] = []
        self.generation: list[int] = []
        self.kind: list[int] = []
        self.root: list[int] = []
        self.param: list[np.ndarray] = []
        self.red_children: dict[int, tuple[int, int, int, int]] = {}
        self.green_children: dict[tuple[int, int], tuple[int, int]] = {}
        self.midpoints: dict[tuple[int, int], int] = {}
        eye = np.eye(3)
        for t in np.asarray(triangles, dtype=int):
            tid = self._add(tuple(int(v) for v in t), -1, 0, ROOT, eye)
            self.root[tid] = tid
        self.n_roots = len(self.tri)

    @property
    def coords(self) -> np.ndarray:
        return self._coords[: self.n_vertices]

    def _add(self, verts, parent, gen, kind, param) -> int:
        tid = len(self.tri)
        self.tri.append(verts)
        self.parent.append(parent)
        self.generation.append(gen)
        self.kind.append(kind)
        self.root.append(self.root[parent] if parent >= 0 else tid)
        self.param.append(param)
        return tid

    def _add_vertices(self, pts: np.ndarray) -> np.ndarray:
        n = len(pts)
        need = self.n_vertices + n
        if need > len(self._coords):
            grown = np.empty((max(need, 2 * len(self._coords)), 3))
            grown[: self.n_vertices] = self.coords
            self._coords = grown
        self._coords[self.n_vertices: need] = pts
        ids = np.arange(self.n_vertices, need)
        self.n_vertices = need
        return ids

    def ensure_midpoints(self, edges: Iterable[tuple[int, int]]) -> None:
        """Create (lifted) midpoint vertices for edges that lack one."""
        new = [e for e in {_key(*e) for e in edges} if e not in self.midpoints]
        if not new:
            return
        new.sort()
        arr = np.array(new)
        flat = 0.5 * (self.coords[arr[:, 0]] + self.coords[arr[:, 1]])
        ids = self._add_vertices(self.surface.lift(flat))
        for e, vid in zip(new, ids):
            self.midpoints[e] = int(vid)

    def red_split(self, tids: Iterable[int]) -> dict[int, tuple[int, ...]]:
        """Four-way split of each triangle through its edge midpoints."""
        tids = list(tids)
        todo = [t for t in tids if t not in self.red_children]
        edges = []
        for t in todo:
            a, b, c = self.tri[t]
            edges += [(a, b), (b, c), (c, a)]
        self.ensure_midpoints(edges)
        for t in todo:
            a, b, c = self.tri[t]
            ab = self.midpoints[_key(a, b)]
            bc = self.midpoints[_key(b, c)]
            ca = self.midpoints[_key(c, a)]
            P = self.param[t]
            pab, pbc, pca = 0.5 * (P[0] + P[1]), 0.5 * (P[1] + P[2]), 0.5 * (P[2] + P[0])
            g = self.generation[t] + 1
            kids = (
                self._add((a, ab, ca), t, g, RED, np.array([P[0], pab, pca])),
                self._add((ab, b, bc), t, g, RED, np.array([pab, P[1], pbc])),
                self._add((ca, bc, c), t, g, RED, np.array([pca, pbc, P[2]])),
                self._add((bc, ca, ab), t, g, RED, np.array([pbc, pca, pab])),
            )
            self.red_children[t] = kids
        return {t: self.red_children[t] for t in tids}

    def green_split(self, items: Iterable[tuple[int, int]]) -> dict[tuple[int, int], tuple[int, int]]:
        """Bisect triangle ``t`` across its local edge ``k`` = (v_k, v_{k+1})."""
        items = list(items)
        todo = [it for it in items if it not in self.green_children]
        edges = []
        for t, k in todo:
            v = self.tri[t]
            edges.append((v[k], v[(k + 1) % 3]))
        self.ensure_midpoints(edges)
        for t, k in todo:
            v = self.tri[t]
            a, b, o = v[k], v[(k + 1) % 3], v[(k + 2) % 3]
            m = self.midpoints[_key(a, b)]
            P = self.param[t]
            pa, pb, po = P[k], P[(k + 1) % 3], P[(k + 2) % 3]
            pm = 0.5 * (pa + pb)
            g = self.generation[t] + 1
            kids = (
                self._add((a, m, o), t, g, GREEN, np.array([pa, pm, po])),
                self._add((m, b, o), t, g, GREEN, np.array([pm, pb, po])),
            )
            self.green_children[(t, k)] = kids
        return {it: self.green_children[it] for it in items}

    def children_of(self, t: int) -> list[tuple[int, ...]]:
        out = []
        if t in self.red_children:
            out.append(self.red_children[t])
        for k in range(3):
            if (t, k) in self.green_children:
                out.append(self.green_children[(t, k)])
        return out

    def edge_length(self, t: int) -> float:
        a, b, c = (self.coords[v] for v in self.tri[t])
        return max(np.linalg.norm(a - b), np.linalg.norm(b - c), np.linalg.norm(c - a))

    def min_edge(self, t: int) -> float:
        a, b, c = (self.coords[v] for v in self.tri[t])
        return min(np.linalg.norm(a - b), np.linalg.norm(b - c), np.linalg.norm(c - a))


@dataclass
class ElementGeometry:
    """Mapping data at the quadrature points of every element.

    Shapes: ``x`` (ne, nq, 3), ``jac`` (ne, nq, 3, 2), ``metric`` and
    ``inv_metric`` (ne, nq, 2, 2), ``sqrt_det`` (ne, nq). ``weights`` are the
    reference-triangle weights (summing to 1/2), so
    ``sum(weights * sqrt_det * f)`` integrates ``f`` over an element.
    """

    rule: TriangleQuadratureRule
    phi: np.ndarray
    dphi: np.ndarray
    x: np.ndarray
    jac: np.ndarray
    metric: np.ndarray
    inv_metric: np.ndarray
    sqrt_det: np.ndarray

    @property
    def weights(self) -> np.ndarray:
        return self.rule.reference_weights

    @property
    def dx(self) -> np.ndarray:
        """Integration weights including the surface measure, (ne, nq)."""
        return self.sqrt_det * self.weights

    def tangential_gradient(self, nodal: np.ndarray) -> np.ndarray:
        """``J g^{-1} grad_u v`` at every quadrature point, (ne, nq, 3).

        ``nodal`` holds element-local coefficients, shape (ne, n_p).
        """
        ref = np.einsum("ea,aqk->eqk", nodal, self.dphi)
        return np.einsum("eqik,eqkl,eql->eqi", self.jac, self.inv_metric, ref)


def compute_geometry(X: np.ndarray, basis: ShapeBasis, points: np.ndarray) -> tuple:
    """Jacobians of ``x(u) = sum_a X_a phi_a(u)`` for element node arrays ``X``."""
    phi = basis.tabulate(points)
    dphi = basis.tabulate_gradients(points)
    x = np.einsum("eai,aq->eqi", X, phi)
    jac = np.einsum("eai,aqk->eqik", X, dphi)
    metric = np.einsum("eqik,eqil->eqkl", jac, jac)
    det = metric[..., 0, 0] * metric[..., 1, 1] - metric[..., 0, 1] * metric[..., 1, 0]
    if np.any(det <= 0.0):
        e, q = np.argwhere(det <= 0.0)[0]
        raise DegenerateElementError(f"element {e}: det g = {det[e, q]:.3e} at point {q}")
    inv = np.empty_like(metric)
    inv[..., 0, 0] = metric[..., 1, 1] / det
    inv[..., 1, 1] = metric[..., 0, 0] / det
    inv[..., 0, 1] = -metric[..., 0, 1] / det
    inv[..., 1, 0] = -metric[..., 1, 0] / det
    return phi, dphi, x, jac, metric, inv, np.sqrt(det)


class SurfaceMesh:
    """Active set of forest triangles carrying degree-``p`` Lagrange nodes.

    Node numbering: triangle vertices first (by vertex id), then edge nodes,
    then element-interior nodes. ``elem_nodes[e]`` lists element ``e``'s
    nodes in basis order.
    """

    def __init__(self, forest: Forest, active, degree: int):
        if degree < 1:
            raise ValueError("geometric degree must be at least 1")
        self.forest = forest
        self.active = np.array(sorted(int(t) for t in active), dtype=np.int64)
        self.active.setflags(write=False)
        self.degree = int(degree)
        self._geometry: dict[int, ElementGeometry] = {}

    @property
    def surface(self) -> LevelSetSurface:
        return self.forest.surface

    @property
    def basis(self) -> ShapeBasis:
        return shape_basis(self.degree)

    @property
    def n_elements(self) -> int:
        return len(self.active)

    @cached_property
    def elem_vertices(self) -> np.ndarray:
        tri = self.forest.tri
        return np.array([tri[t] for t in self.active], dtype=np.int64).reshape(-1, 3)

    @cached_property
    def _index(self) -> dict[int, int]:
        return {int(t): i for i, t in enumerate(self.active)}

    def local_index(self, tid: int) -> int:
        return self._index[int(tid)]

    def with_degree(self, degree: int) -> "SurfaceMesh":
        return SurfaceMesh(self.forest, self.active, degree)

    @cached_property
    def _nodes(self):
        p = self.degree
        ev = self.elem_vertices
        ne = len(ev)
        basis = self.basis
        n_p = basis.n_basis
        V = self.forest.coords
        verts, vinv = np.unique(ev, return_inverse=True)
        vinv = vinv.reshape(ne, 3)
        elem_nodes = np.empty((ne, n_p), dtype=np.int64)
        edge_slots, interior_slots = [], []
        for a, m in enumerate(basis.indices):
            nz = [i for i in range(3) if m[i] > 0]
            if len(nz) == 1:
                elem_nodes[:, a] = vinv[:, nz[0]]
            elif len(nz) == 2:
                edge_slots.append((a, nz[0], nz[1], m[nz[0]], m[nz[1]]))
            else:
                interior_slots.append((a, m))
        coords = [V[verts]]
        n_done = len(verts)
        nv = self.forest.n_vertices
        if edge_slots:
            codes = []
            for a, i, j, mi, mj in edge_slots:
                vi, vj = ev[:, i], ev[:, j]
                lo = np.minimum(vi, vj)
                hi = np.maximum(vi, vj)
                s = np.where(vi < vj, mj, mi)
                codes.append((lo * nv + hi) * p + s)
            codes = np.stack(codes, axis=1)
            uniq, inv = np.unique(codes.ravel(), return_inverse=True)
            inv = inv.reshape(codes.shape)
            for c, (a, *_rest) in enumerate(edge_slots):
                elem_nodes[:, a] = n_done + inv[:, c]
            s = uniq % p
            pair = uniq // p
            lo, hi = pair // nv, pair % nv
            flat = ((p - s)[:, None] * V[lo] + s[:, None] * V[hi]) / p
            coords.append(self.surface.lift(flat))
            n_done += len(uniq)
            self._edge_codes = (uniq, lo, hi)
        else:
            self._edge_codes = (np.zeros(0, np.int64),) * 3
        if interior_slots:
            for c, (a, m) in enumerate(interior_slots):
                elem_nodes[:, a] = n_done + np.arange(ne) * len(interior_slots) + c
            lam = np.array([[mi / p for mi in m] for _, m in interior_slots])
            flat = np.einsum("sk,ekd->esd", lam, V[ev]).reshape(-1, 3)
            coords.append(self.surface.lift(flat))
            n_done += ne * len(interior_slots)
        nodes = np.concatenate(coords, axis=0)
        nodes.setflags(write=False)
        elem_nodes.setflags(write=False)
        return nodes, elem_nodes, verts

    @property
    def nodes(self) -> np.ndarray:
        return self._nodes[0]

    @property
    def elem_nodes(self) -> np.ndarray:
        return self._nodes[1]

    @property
    def vertex_ids(self) -> np.ndarray:
        """Forest vertex id of each of the first ``n_vertices`` nodes."""
        return self._nodes[2]

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @cached_property
    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Unique vertex edges ``(n_edges, 2)`` and how many elements use each."""
        ev = self.elem_vertices
        e = np.concatenate([ev[:, [0, 1]], ev[:, [1, 2]], ev[:, [2, 0]]])
        e.sort(axis=1)
        uniq, counts = np.unique(e, axis=0, return_counts=True)
        return uniq, counts

    @cached_property
    def boundary_nodes(self) -> np.ndarray:
        """Boolean mask of nodes lying on boundary edges."""
        mask = np.zeros(self.n_nodes, dtype=bool)
        edges, counts = self.edges
        bnd = edges[counts == 1]
        if len(bnd) == 0:
            return mask
        vpos = {int(v): i for i, v in enumerate(self.vertex_ids)}
        for a, b in bnd:
            mask[vpos[int(a)]] = True
            mask[vpos[int(b)]] = True
        if self.degree > 1:
            nodes = self.nodes  # noqa: F841 - forces numbering
            uniq, lo, hi = self._edge_codes
            nv = self.forest.n_vertices
            bset = set((bnd[:, 0] * nv + bnd[:, 1]).tolist())
            first = len(self.vertex_ids)
            hit = np.array([int(l) * nv + int(h) in bset for l, h in zip(lo, hi)], dtype=bool)
            mask[first + np.flatnonzero(hit)] = True
        return mask

    @cached_property
    def node_owner(self) -> tuple[np.ndarray, np.ndarray]:
        """For each node, one element containing it and its local basis index."""
        flat = self.elem_nodes.ravel()
        _, first = np.unique(flat, return_index=True)
        n_p = self.elem_nodes.shape[1]
        return first // n_p, first % n_p

    def geometry(self, rule: TriangleQuadratureRule | int | None = None) -> ElementGeometry:
        if rule is None:
            rule = 2 * self.degree + 2
        if isinstance(rule, int):
            rule = gauss_rule(rule)
        geo = self._geometry.get(rule.degree)
        if geo is None:
            X = self.nodes[self.elem_nodes]
            geo = ElementGeometry(rule, *compute_geometry(X, self.basis, rule.points))
            self._geometry[rule.degree] = geo
        return geo

    @cached_property
    def element_areas(self) -> np.ndarray:
        return self.geometry().dx.sum(axis=1)

    @property
    def area(self) -> float:
        return float(self.element_areas.sum())

    @cached_property
    def element_sizes(self) -> np.ndarray:
        """Longest vertex-to-vertex edge of each element."""
        X = self.forest.coords[self.elem_vertices]
        d = np.stack([
            np.linalg.norm(X[:, 0] - X[:, 1], axis=1),
            np.linalg.norm(X[:, 1] - X[:, 2], axis=1),
            np.linalg.norm(X[:, 2] - X[:, 0], axis=1),
        ], axis=1)
        return d.max(axis=1)

    @property
    def h_min(self) -> float:
        return float(self.element_sizes.min())

    @property
    def h_max(self) -> float:
        return float(self.element_sizes.max())

    @property
    def generations(self) -> np.ndarray:
        g = self.forest.generation
        return np.array([g[t] for t in self.active])

    def kinds(self) -> np.ndarray:
        k = self.forest.kind
        return np.array([k[t] for t in self.active])

    def is_conforming(self) -> bool:
        """No hanging nodes; interior edges shared by exactly two elements."""
        edges, counts = self.edges
        if np.any(counts > 2):
            return False
        if self.surface.closed and not np.all(counts == 2):
            return False
        return self.hanging_nodes() == 0

    def hanging_nodes(self) -> int:
        """Number of element sides that carry an active vertex in their interior."""
        edges, _ = self.edges
        eset = {tuple(int(x) for x in e) for e in edges}
        mids = self.forest.midpoints
        n = 0
        for a, b in edges:
            m = mids.get((int(a), int(b)))
            if m is not None and max(_depth(mids, eset, int(a), m), _depth(mids, eset, m, int(b))) >= 0:
                n += 1
        return n

    def uniform_node_count(self, generation: int) -> int:
        """Nodes of the root mesh refined uniformly ``generation`` times."""
        root = SurfaceMesh(self.forest, range(self.forest.n_roots), 1)
        edges, counts = root.edges
        V, E, F = len(root.vertex_ids), len(edges), root.n_elements
        Eb = int(np.sum(counts == 1))
        for _ in range(generation):
            V, E, F, Eb = V + E, 2 * E + 3 * F, 4 * F, 2 * Eb
        p = self.degree
        return V + (p - 1) * E + (p - 1) * (p - 2) // 2 * F

    def matched_uniform_nodes(self) -> int:
        """DOFs of the uniform refinement whose elements match the finest ones here."""
        kinds = self.kinds()
        gens = self.generations
        red = gens[kinds != GREEN]
        g = int(red.max()) if red.size else int(gens.max()) - 1
        return self.uniform_node_count(g)

    def evaluate(self, values: np.ndarray, elements: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Evaluate a nodal field at reference points ``u`` of local ``elements``."""
        phi = self.basis.tabulate(u, check=False)
        coef = np.asarray(values)[self.elem_nodes[elements]]
        return np.einsum("na,an->n", coef, phi)

    def same_as(self, other: "SurfaceMesh") -> bool:
        return (self.forest is other.forest and self.degree == other.degree
                and np.array_equal(self.active, other.active))


# ---------------------------------------------------------------------------
# construction

def _icosahedron() -> tuple[np.ndarray, np.ndarray]:
    t = (1.0 + 5.0**0.5) / 2.0
    v = np.array([
        [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
        [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
        [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
    ], dtype=float)
    f = np.array([
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ])
    return v / np.linalg.norm(v, axis=1, keepdims=True), f


def build_icosphere(level: int, radius: float = 1.0, p: int = 1,
                    surface: LevelSetSurface | None = None) -> SurfaceMesh:
    """Icosahedron refined ``level`` times; all nodes projected to the surface.

    With ``surface`` given, the icosahedron of ``radius`` is projected onto
    that (star-shaped, closed) level set instead of a sphere.
    """
    if level < 0:
        raise ValueError("level must be nonnegative")
    if surface is None:
        surface = Sphere(radius)
    v, f = _icosahedron()
    forest = Forest(surface, surface.lift(radius * v), f)
    active = list(range(forest.n_roots))
    for _ in range(level):
        kids = forest.red_split(active)
        active = [c for t in active for c in kids[t]]
    return SurfaceMesh(forest, active, p)


def build_parametric_patch(surface, rect=None, resolution: int = 4, p: int = 1) -> SurfaceMesh:
    """Structured triangulation of a parameter rectangle lifted to a graph surface."""
    if rect is None:
        rect = getattr(surface, "rect", (-1.0, 1.0, -1.0, 1.0))
    x0, x1, y0, y1 = (float(r) for r in rect)
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"degenerate parameter rectangle {rect}")
    n = int(resolution)
    if n < 1:
        raise ValueError("resolution must be at least 1")
    xs = np.linspace(x0, x1, n + 1)
    ys = np.linspace(y0, y1, n + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    flat = np.stack([X.ravel(), Y.ravel(), np.zeros(X.size)], axis=1)
    idx = lambda i, j: i * (n + 1) + j  # noqa: E731
    tris = []
    for i in range(n):
        for j in range(n):
            a, b, c, d = idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)
            tris.append((a, b, c))
            tris.append((a, c, d))
    forest = Forest(surface, surface.lift(flat), np.array(tris))
    return SurfaceMesh(forest, range(forest.n_roots), p)


# ---------------------------------------------------------------------------
# refinement and coarsening

@dataclass
class AdaptReport:
    refined: int = 0
    coarsened: int = 0
    skipped: list[int] = field(default_factory=list)
    ignored: list[int] = field(default_factory=list)
    closure: int = 0


def _edge_set(forest: Forest, active) -> set:
    E = set()
    tri = forest.tri
    for t in active:
        a, b, c = tri[t]
        E.add(_key(a, b))
        E.add(_key(b, c))
        E.add(_key(c, a))
    return E


def _depth(mids: dict, E: set, u: int, v: int) -> int:
    """How many times the side ``(u, v)`` is subdivided in ``E``; -1 if it is absent."""
    if _key(u, v) in E:
        return 0
    m = mids.get(_key(u, v))
    if m is None:
        return -1
    d = max(_depth(mids, E, u, m), _depth(mids, E, m, v))
    return d + 1 if d >= 0 else -1


def _split_edges(forest: Forest, t: int, E: set) -> tuple[list[int], bool]:
    """Local edges of ``t`` carrying a hanging midpoint, and whether any is split twice."""
    mids = forest.midpoints
    a, b, c = forest.tri[t]
    split, twice = [], False
    for k, (u, v) in enumerate(((a, b), (b, c), (c, a))):
        m = mids.get(_key(u, v))
        if m is None:
            continue
        d = max(_depth(mids, E, u, m), _depth(mids, E, m, v))
        if d >= 0:
            split.append(k)
            twice = twice or d >= 1
    return split, twice


def _ungreen(forest: Forest, active: set, marks: dict, combine) -> tuple[set, dict]:
    parent = forest.parent
    kind = forest.kind
    greens = [t for t in active if kind[t] == GREEN]
    out_marks = dict(marks)
    for t in greens:
        if t not in active:
            continue
        P = parent[t]
        sibs = next(k for k in forest.children_of(P) if t in k)
        vals = [out_marks.pop(s, 0) for s in sibs]
        for s in sibs:
            active.discard(s)
        active.add(P)
        v = combine(vals)
        if v:
            out_marks[P] = v
    return active, out_marks


def _regularize(forest: Forest, active: set) -> int:
    """Red-refine until every element has at most one singly split edge."""
    n = 0
    while True:
        E = _edge_set(forest, active)
        to_red = []
        for t in active:
            split, twice = _split_edges(forest, t, E)
            if len(split) >= 2 or twice:
                to_red.append(t)
        if not to_red:
            return n
        kids = forest.red_split(to_red)
        for t in to_red:
            active.discard(t)
            active.update(kids[t])
        n += len(to_red)


def _green_close(forest: Forest, active: set) -> int:
    E = _edge_set(forest, active)
    items = []
    for t in active:
        split, _ = _split_edges(forest, t, E)
        if len(split) == 1:
            items.append((t, split[0]))
    kids = forest.green_split(items)
    for it in items:
        active.discard(it[0])
        active.update(kids[it])
    return len(items)


def _marks_by_id(mesh: SurfaceMesh, marked) -> dict[int, int]:
    if isinstance(marked, Mapping):
        return {int(k): int(v) for k, v in marked.items() if int(v) != 0}
    arr = np.asarray(marked, dtype=int)
    if arr.shape != (mesh.n_elements,):
        raise ValueError("mark array must have one entry per element")
    nz = np.flatnonzero(arr)
    return {int(mesh.active[i]): int(arr[i]) for i in nz}


def refine(mesh: SurfaceMesh, marked, h_floor: float | None = None,
           report: AdaptReport | None = None) -> SurfaceMesh:
    """Red-refine marked elements ``count`` times, then close with green bisections.

    ``marked`` maps forest triangle ids to counts, or is an integer array
    aligned with ``mesh.active``; only positive counts are used. Marks on
    green elements are moved to the green parent, which is red-refined.
    """
    forest = mesh.forest
    report = report if report is not None else AdaptReport()
    marks = {t: c for t, c in _marks_by_id(mesh, marked).items() if c > 0}
    if not marks:
        return mesh
    if h_floor is None:
        h_floor = 1e-4 * forest.surface.scale
    active = set(int(t) for t in mesh.active)
    active, marks = _ungreen(forest, active, marks, max)
    while marks:
        todo = []
        for t, c in marks.items():
            if t not in active:
                continue
            if 0.5 * forest.min_edge(t) < h_floor:
                report.skipped.append(t)
                continue
            todo.append(t)
        kids = forest.red_split(todo)
        new_marks = {}
        for t in todo:
            active.discard(t)
            active.update(kids[t])
            report.refined += 1
            if marks[t] > 1:
                for k in kids[t]:
                    new_marks[k] = marks[t] - 1
        marks = new_marks
        report.closure += _regularize(forest, active)
    report.closure += _green_close(forest, active)
    if active == set(int(t) for t in mesh.active):
        return mesh
    return SurfaceMesh(forest, active, mesh.degree)


def coarsen(mesh: SurfaceMesh, marked, report: AdaptReport | None = None,
            min_generation: int = 0) -> SurfaceMesh:
    """Merge red sibling groups whose four members are all marked.

    ``marked`` holds coarsening counts; the absolute value of every nonzero
    entry is used. A group merges
    at most ``min(counts)`` times and never below ``min_generation``.
    """
    forest = mesh.forest
    report = report if report is not None else AdaptReport()
    marks = {t: abs(c) for t, c in _marks_by_id(mesh, marked).items()}
    if not marks:
        return mesh
    active = set(int(t) for t in mesh.active)
    active, marks = _ungreen(forest, active, marks, min)
    parent = forest.parent
    gen = forest.generation
    while True:
        groups = {}
        for t, c in marks.items():
            if t in active and c > 0 and parent[t] >= 0 and forest.kind[t] == RED:
                groups.setdefault(parent[t], []).append(t)
        merged = []
        for P, members in groups.items():
            kids = forest.red_children[P]
            if gen[P] < min_generation:
                continue
            if len(members) == 4 and all(k in active for k in kids):
                merged.append(P)
        if not merged:
            break
        new_marks = {}
        for P in merged:
            kids = forest.red_children[P]
            c = min(marks[k] for k in kids) - 1
            for k in kids:
                active.discard(k)
                marks.pop(k, None)
            active.add(P)
            if c > 0:
                new_marks[P] = c
            report.coarsened += 1
        for t, c in marks.items():
            if t in active:
                new_marks.setdefault(t, c)
        marks = new_marks
    before = set(active)
    report.closure += _regularize(forest, active)
    undone = before - active
    report.ignored.extend(sorted(undone))
    report.closure += _green_close(forest, active)
    if active == set(int(t) for t in mesh.active):
        return mesh
    return SurfaceMesh(forest, active, mesh.degree)


# ---------------------------------------------------------------------------
# field transfer

@dataclass
class TransferReport:
    located: int = 0
    fallbacks: int = 0


def transfer_field(old: SurfaceMesh, values: np.ndarray, new: SurfaceMesh,
                   report: TransferReport | None = None) -> np.ndarray:
    """Interpolate a finite-element function from ``old`` onto the nodes of ``new``.

    Each new node is located in the old mesh by its root-barycentric
    position; the old function is evaluated there.
    """
    report = report if report is not None else TransferReport()
    values = np.asarray(values)
    if values.shape[0] != old.n_nodes:
        raise ValueError("field length does not match the old mesh")
    if old.same_as(new):
        report.located = new.n_nodes
        return values.copy()
    if old.forest is not new.forest:
        raise ValueError("meshes must share a refinement forest")
    forest = old.forest
    old_active = old._index
    closure: dict[int, set] = {}
    parent = forest.parent
    for t in old.active:
        t = int(t)
        while parent[t] >= 0:
            P = parent[t]
            kids = closure.setdefault(P, set())
            if t in kids:
                break
            kids.add(t)
            t = P

    owner_e, owner_a = new.node_owner
    lam_lattice = new.basis.lattice_barycentric
    n = new.n_nodes
    tgt_elem = np.empty(n, dtype=np.int64)
    tgt_u = np.empty((n, 2))
    anc_cache: dict[int, int] = {}
    for i in range(n):
        tid = int(new.active[owner_e[i]])
        xi = lam_lattice[owner_a[i]] @ forest.param[tid]
        A = anc_cache.get(tid)
        if A is None:
            A = tid
            while A not in old_active and A not in closure:
                A = parent[A]
            anc_cache[tid] = A
        T = A
        fell_back = False
        while T not in old_active:
            best, best_lam, best_min = None, None, -np.inf
            for c in closure[T]:
                lc = np.linalg.solve(forest.param[c].T, xi)
                mn = lc.min()
                if mn > best_min:
                    best, best_lam, best_min = c, lc, mn
            if best_min < -1e-9:
                fell_back = True
            T = best
        lt = np.linalg.solve(forest.param[T].T, xi)
        if lt.min() < -1e-9:
            fell_back = True
        lt = np.clip(lt, 0.0, None)
        lt /= lt.sum()
        tgt_elem[i] = old_active[T]
        tgt_u[i] = lt[1:]
        if fell_back:
            report.fallbacks += 1
        else:
            report.located += 1
    if values.ndim == 1:
        return old.evaluate(values, tgt_elem, tgt_u)
    return np.stack([old.evaluate(values[:, k], tgt_elem, tgt_u)
                     for k in range(values.shape[1])], axis=1)
