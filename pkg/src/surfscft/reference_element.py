"""Lagrange bases and quadrature on the unit reference triangle.

The reference triangle has vertices ``(0, 0)``, ``(1, 0)`` and ``(0, 1)``;
a reference point ``u = (xi, eta)`` has barycentric coordinates
``(1 - xi - eta, xi, eta)``.

Basis functions of degree ``p`` are indexed by multi-indices
``(m0, m1, m2)`` with ``m0 + m1 + m2 = p`` and are ordered by
``m1 + m2`` ascending, then ``m1`` descending::

    0: (p, 0, 0)   1: (p-1, 1, 0)   2: (p-1, 0, 1)   3: (p-2, 2, 0) ...

Basis ``alpha`` is one at its lattice point ``(m1/p, m2/p)`` and vanishes at
every other lattice point.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import comb, factorial
from typing import NamedTuple

import numpy as np

from ._quadrature_tables import RULES

BARY_TOL = 1e-12


class MultiIndex(NamedTuple):
    m0: int
    m1: int
    m2: int

    @property
    def degree(self) -> int:
        return self.m0 + self.m1 + self.m2

    def factorial(self) -> int:
        return factorial(self.m0) * factorial(self.m1) * factorial(self.m2)


def enumerate_multi_indices(p: int) -> list[MultiIndex]:
    """All multi-indices of total degree ``p`` in basis order."""
    if p < 0:
        raise ValueError(f"degree must be nonnegative, got {p}")
    out = []
    for level in range(p + 1):
        for m2 in range(level + 1):
            out.append(MultiIndex(p - level, level - m2, m2))
    return out


def barycentric(u: np.ndarray) -> np.ndarray:
    """Map reference points ``(..., 2)`` to barycentric coordinates ``(..., 3)``."""
    u = np.asarray(u, dtype=float)
    return np.stack([1.0 - u[..., 0] - u[..., 1], u[..., 0], u[..., 1]], axis=-1)


def _check_inside(lam: np.ndarray) -> None:
    if np.any(lam < -BARY_TOL):
        bad = lam[np.any(lam < -BARY_TOL, axis=-1)][0]
        raise ValueError(f"point outside the reference triangle: barycentric {bad}")


def _falling(x: np.ndarray, p: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Value and derivative of prod_{j<m} (p x - j)."""
    val = np.ones_like(x)
    der = np.zeros_like(x)
    for j in range(m):
        factor = p * x - j
        der = der * factor + p * val
        val = val * factor
    return val, der


@dataclass(frozen=True)
class ShapeBasis:
    """Degree-``p`` Lagrange basis built from the barycentric product formula."""

    degree: int
    indices: tuple[MultiIndex, ...] = field(init=False, repr=False)
    _inv_fact: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.degree < 0:
            raise ValueError("degree must be nonnegative")
        idx = tuple(enumerate_multi_indices(self.degree))
        object.__setattr__(self, "indices", idx)
        object.__setattr__(
            self, "_inv_fact", np.array([1.0 / m.factorial() for m in idx])
        )

    @property
    def n_basis(self) -> int:
        return comb(self.degree + 2, 2)

    @property
    def lattice_points(self) -> np.ndarray:
        """Reference coordinates ``(m1/p, m2/p)`` of every basis function, ``(n_p, 2)``."""
        p = max(self.degree, 1)
        if self.degree == 0:
            return np.array([[1.0 / 3.0, 1.0 / 3.0]])
        return np.array([[m.m1 / p, m.m2 / p] for m in self.indices])

    @property
    def lattice_barycentric(self) -> np.ndarray:
        """Lattice points in barycentric coordinates, ``(n_p, 3)``."""
        return barycentric(self.lattice_points)

    def _check_alpha(self, alpha: int) -> None:
        if not 0 <= alpha < self.n_basis:
            raise IndexError(
                f"basis index {alpha} out of range for degree {self.degree} "
                f"(n_p = {self.n_basis})"
            )

    def tabulate(self, u: np.ndarray, check: bool = True) -> np.ndarray:
        """Values of every basis function at points ``u`` of shape ``(n, 2)``.

        Returns an ``(n_p, n)`` table.
        """
        lam = barycentric(np.atleast_2d(u))
        if check:
            _check_inside(lam)
        p = self.degree
        table = np.empty((self.n_basis, lam.shape[0]))
        cache = {}
        for a, m in enumerate(self.indices):
            val = self._inv_fact[a]
            for i, mi in enumerate(m):
                key = (i, mi)
                if key not in cache:
                    cache[key] = _falling(lam[:, i], p, mi)
                val = val * cache[key][0]
            table[a] = val
        return table

    def tabulate_gradients(self, u: np.ndarray, check: bool = True) -> np.ndarray:
        """Reference gradients ``(d/dxi, d/deta)``, returned as ``(n_p, n, 2)``."""
        lam = barycentric(np.atleast_2d(u))
        if check:
            _check_inside(lam)
        p = self.degree
        n = lam.shape[0]
        grads = np.empty((self.n_basis, n, 2))
        for a, m in enumerate(self.indices):
            vals = []
            ders = []
            for i, mi in enumerate(m):
                v, d = _falling(lam[:, i], p, mi)
                vals.append(v)
                ders.append(d)
            dl0 = ders[0] * vals[1] * vals[2]
            dl1 = vals[0] * ders[1] * vals[2]
            dl2 = vals[0] * vals[1] * ders[2]
            c = self._inv_fact[a]
            grads[a, :, 0] = c * (dl1 - dl0)
            grads[a, :, 1] = c * (dl2 - dl0)
        return grads

    def eval_shape(self, alpha: int, u) -> float:
        self._check_alpha(alpha)
        return float(self.tabulate(np.asarray(u, dtype=float).reshape(1, 2))[alpha, 0])

    def eval_shape_gradient(self, alpha: int, u) -> np.ndarray:
        self._check_alpha(alpha)
        return self.tabulate_gradients(np.asarray(u, dtype=float).reshape(1, 2))[alpha, 0]


@lru_cache(maxsize=None)
def shape_basis(p: int) -> ShapeBasis:
    return ShapeBasis(p)


def eval_shape(basis: ShapeBasis, alpha: int, u) -> float:
    return basis.eval_shape(alpha, u)


def eval_shape_gradient(basis: ShapeBasis, alpha: int, u) -> np.ndarray:
    return basis.eval_shape_gradient(alpha, u)


@dataclass(frozen=True)
class TriangleQuadratureRule:
    """Symmetric rule on the reference triangle.

    ``weights`` sum to one, so an integral over a triangle of measure ``|T|``
    is ``|T| * sum(w * f(x))``. Over the reference triangle (area 1/2) use
    ``reference_weights``.
    """

    degree: int
    barycentric: np.ndarray
    weights: np.ndarray

    @property
    def points(self) -> np.ndarray:
        """Reference coordinates ``(xi, eta)``, shape ``(n, 2)``."""
        return self.barycentric[:, 1:]

    @property
    def reference_weights(self) -> np.ndarray:
        return 0.5 * self.weights

    def __len__(self) -> int:
        return len(self.weights)


def _expand(orbits) -> tuple[np.ndarray, np.ndarray]:
    pts, wts = [], []
    for w, a, b in orbits:
        if a is None:
            pts.append((1 / 3, 1 / 3, 1 / 3))
            wts.append(w)
        elif b is None:
            c = 1.0 - 2.0 * a
            for q in ((a, a, c), (a, c, a), (c, a, a)):
                pts.append(q)
                wts.append(w)
        else:
            c = 1.0 - a - b
            for q in ((a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)):
                pts.append(q)
                wts.append(w)
    return np.array(pts), np.array(wts)


@lru_cache(maxsize=None)
def gauss_rule(d: int) -> TriangleQuadratureRule:
    """Symmetric Gaussian rule exact for polynomials of total degree ``d``."""
    if d not in RULES:
        raise ValueError(f"unsupported quadrature degree {d}; available 1..{max(RULES)}")
    lam, w = _expand(RULES[d])
    lam.setflags(write=False)
    w.setflags(write=False)
    return TriangleQuadratureRule(d, lam, w)
