"""Level-set surfaces and closest-point projection.

All arrays of points have shape ``(n, 3)``. Lengths are in units of the
polymer radius of gyration.
"""
from __future__ import annotations

import numpy as np


class ProjectionError(RuntimeError):
    """Closest-point iteration failed to converge."""

    def __init__(self, point, residual):
        self.point = np.asarray(point)
        self.residual = residual
        super().__init__(
            f"closest-point projection did not converge for point {self.point} "
            f"(|psi| = {residual:.3e})"
        )


class LevelSetSurface:
    """Surface ``{psi = 0}`` with analytic gradient and Hessian.

    Subclasses implement ``psi``, ``grad`` and ``hessian``. ``scale`` is a
    characteristic diameter used for relative tolerances.
    """

    closed = True
    name = "levelset"

    def __init__(self, scale: float = 1.0):
        self.scale = float(scale)

    def psi(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def grad(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def hessian(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def normal(self, x: np.ndarray) -> np.ndarray:
        g = self.grad(np.atleast_2d(x))
        return g / np.linalg.norm(g, axis=1, keepdims=True)

    def project(self, x: np.ndarray, tol: float = 1e-12, max_iter: int = 30) -> np.ndarray:
        """Closest point on the surface for every row of ``x``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return closest_point(self, x, tol=tol, max_iter=max_iter)

    def lift(self, x: np.ndarray) -> np.ndarray:
        """Map points of a flat triangulation onto the surface."""
        return self.project(x)

    def describe(self) -> dict:
        return {"name": self.name, "scale": self.scale}


def _foot_point(surface, x, tol, max_iter):
    """Damped Newton along the gradient: x <- x - psi grad / |grad|^2."""
    y = x.copy()
    L = surface.scale
    for _ in range(max_iter):
        psi = surface.psi(y)
        if np.all(np.abs(psi) <= tol * L):
            return y
        g = surface.grad(y)
        step = (psi / np.einsum("ij,ij->i", g, g))[:, None] * g
        trial = y - step
        # halve steps that do not reduce |psi|
        bad = np.abs(surface.psi(trial)) > np.abs(psi)
        damp = 1.0
        while np.any(bad) and damp > 1e-3:
            damp *= 0.5
            trial[bad] = y[bad] - damp * step[bad]
            bad = np.abs(surface.psi(trial)) > np.abs(psi)
        y = trial
    return y


def _kkt_newton(surface, x, y, tol, max_iter):
    """Newton on ``y - x + mu grad psi(y) = 0, psi(y) = 0`` from the start ``y``.

    Returns ``(y, mu, ok)`` with ``ok`` marking rows that converged.
    """
    L = surface.scale
    y = y.copy()
    g = surface.grad(y)
    mu = np.einsum("ij,ij->i", x - y, g) / np.einsum("ij,ij->i", g, g)
    active = np.ones(len(x), dtype=bool)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        ya, xa, ma = y[idx], x[idx], mu[idx]
        ga = surface.grad(ya)
        Ha = surface.hessian(ya)
        res = np.empty((idx.size, 4))
        res[:, :3] = ya - xa + ma[:, None] * ga
        res[:, 3] = surface.psi(ya)
        jac = np.zeros((idx.size, 4, 4))
        jac[:, :3, :3] = np.eye(3) + ma[:, None, None] * Ha
        jac[:, :3, 3] = ga
        jac[:, 3, :3] = ga
        try:
            delta = np.linalg.solve(jac, -res[..., None])[..., 0]
        except np.linalg.LinAlgError:
            delta = np.einsum("nij,nj->ni", np.linalg.pinv(jac), -res)
        y[idx] = ya + delta[:, :3]
        mu[idx] = ma + delta[:, 3]
        done = (np.abs(surface.psi(y[idx])) <= tol * L) & (
            np.linalg.norm(delta[:, :3], axis=1) <= 1e-13 * L
        )
        active[idx[done]] = False
    ok = ~active & (np.abs(surface.psi(y)) <= tol * L) & np.all(np.isfinite(y), axis=1)
    return y, mu, ok


def _tangent_curvature(surface, y, mu):
    """Smallest eigenpair of ``I + mu Hess psi`` restricted to the tangent plane."""
    n = surface.normal(y)
    a = np.where(np.abs(n[:, :1]) < 0.9, np.array([[1.0, 0.0, 0.0]]), np.array([[0.0, 1.0, 0.0]]))
    t1 = np.cross(n, a)
    t1 /= np.linalg.norm(t1, axis=1, keepdims=True)
    t2 = np.cross(n, t1)
    T = np.stack([t1, t2], axis=2)
    B = np.eye(3) + mu[:, None, None] * surface.hessian(y)
    lam, vec = np.linalg.eigh(np.einsum("nik,nij,njl->nkl", T, B, T))
    return lam[:, 0], np.einsum("nik,nk->ni", T, vec[:, :, 0])


def closest_point(surface: LevelSetSurface, x: np.ndarray, tol: float = 1e-12,
                  max_iter: int = 30) -> np.ndarray:
    """Solve ``y - x + mu grad psi(y) = 0, psi(y) = 0`` by Newton's method.

    The start value comes from a gradient-line foot-point iteration, which is
    already close to the surface; the Lagrange system then moves the point
    tangentially to a stationary point of ``|y - x|``. Stationary points that
    are not local minima (``I + mu Hess psi`` indefinite on the tangent plane,
    e.g. the apex of a paraboloid seen from its axis) are left by a tangential
    kick in both directions and the nearer minimiser is kept.
    """
    L = surface.scale
    y, mu, ok = _kkt_newton(surface, x, _foot_point(surface, x, tol, max_iter), tol, max_iter)
    for _ in range(4):
        idx = np.flatnonzero(ok)
        if idx.size == 0:
            break
        lam, v = _tangent_curvature(surface, y[idx], mu[idx])
        bad = idx[lam < -1e-10]
        if bad.size == 0:
            break
        step = 0.5 * np.maximum(np.linalg.norm(x[bad] - y[bad], axis=1), 1e-3 * L)[:, None]
        vb = v[lam < -1e-10]
        best = y[bad].copy()
        best_d = np.full(bad.size, np.inf)
        best_mu = mu[bad].copy()
        for sign in (1.0, -1.0):
            start = _foot_point(surface, y[bad] + sign * step * vb, tol, max_iter)
            yt, mt, okt = _kkt_newton(surface, x[bad], start, tol, max_iter)
            d = np.where(okt, np.linalg.norm(yt - x[bad], axis=1), np.inf)
            take = d < best_d
            best[take], best_d[take], best_mu[take] = yt[take], d[take], mt[take]
        keep = np.isfinite(best_d)
        y[bad[keep]], mu[bad[keep]] = best[keep], best_mu[keep]
    if not np.all(ok):
        failed = np.flatnonzero(~ok)[0]
        raise ProjectionError(x[failed], float(np.abs(surface.psi(y[failed:failed + 1]))[0]))
    return y


def project_to_surface(point, surface: LevelSetSurface) -> np.ndarray:
    """Closest point on ``surface`` to a single 3-vector."""
    return surface.project(np.asarray(point, dtype=float).reshape(1, 3))[0]


class Sphere(LevelSetSurface):
    closed = True
    name = "sphere"

    def __init__(self, radius: float = 1.0, center=(0.0, 0.0, 0.0)):
        super().__init__(scale=2.0 * radius)
        self.radius = float(radius)
        self.center = np.asarray(center, dtype=float)

    def psi(self, x):
        d = np.atleast_2d(x) - self.center
        return np.einsum("ij,ij->i", d, d) - self.radius**2

    def grad(self, x):
        return 2.0 * (np.atleast_2d(x) - self.center)

    def hessian(self, x):
        n = np.atleast_2d(x).shape[0]
        return np.broadcast_to(2.0 * np.eye(3), (n, 3, 3)).copy()

    def project(self, x, tol=1e-12, max_iter=30):
        d = np.atleast_2d(np.asarray(x, dtype=float)) - self.center
        r = np.linalg.norm(d, axis=1, keepdims=True)
        if np.any(r == 0.0):
            raise ProjectionError(np.atleast_2d(x)[np.flatnonzero(r[:, 0] == 0)[0]], self.radius**2)
        return self.center + self.radius * d / r

    def area(self) -> float:
        return 4.0 * np.pi * self.radius**2

    def describe(self):
        return {"name": self.name, "radius": self.radius}


class GraphSurface(LevelSetSurface):
    """Open surface ``z = h(x, y)`` over a parameter rectangle, ``psi = z - h``.

    Meshes are lifted vertically so boundary nodes stay on the rectangle
    boundary.
    """

    closed = False
    name = "graph"

    def __init__(self, rect=(-1.0, 1.0, -1.0, 1.0)):
        x0, x1, y0, y1 = rect
        super().__init__(scale=float(np.hypot(x1 - x0, y1 - y0)))
        self.rect = tuple(float(v) for v in rect)

    def height(self, x, y):
        raise NotImplementedError

    def height_grad(self, x, y):
        raise NotImplementedError

    def height_hessian(self, x, y):
        """Return ``(hxx, hxy, hyy)``."""
        raise NotImplementedError

    def psi(self, x):
        x = np.atleast_2d(x)
        return x[:, 2] - self.height(x[:, 0], x[:, 1])

    def grad(self, x):
        x = np.atleast_2d(x)
        hx, hy = self.height_grad(x[:, 0], x[:, 1])
        return np.stack([-hx, -hy, np.ones_like(hx)], axis=1)

    def hessian(self, x):
        x = np.atleast_2d(x)
        hxx, hxy, hyy = self.height_hessian(x[:, 0], x[:, 1])
        H = np.zeros((x.shape[0], 3, 3))
        H[:, 0, 0] = -hxx
        H[:, 0, 1] = H[:, 1, 0] = -hxy
        H[:, 1, 1] = -hyy
        return H

    def lift(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.stack([x[:, 0], x[:, 1], self.height(x[:, 0], x[:, 1])], axis=1)

    def describe(self):
        return {"name": self.name, "rect": list(self.rect)}


class Saddle(GraphSurface):
    """``z = a (x^2 - y^2)``."""

    name = "saddle"

    def __init__(self, rect=(-1.0, 1.0, -1.0, 1.0), a: float = 1.0):
        super().__init__(rect)
        self.a = float(a)

    def height(self, x, y):
        return self.a * (x * x - y * y)

    def height_grad(self, x, y):
        return 2.0 * self.a * x, -2.0 * self.a * y

    def height_hessian(self, x, y):
        one = np.ones_like(x)
        return 2.0 * self.a * one, 0.0 * one, -2.0 * self.a * one

    def describe(self):
        return {"name": self.name, "rect": list(self.rect), "a": self.a}


class Paraboloid(GraphSurface):
    """``z = a (x^2 + y^2)``."""

    name = "paraboloid"

    def __init__(self, rect=(-1.0, 1.0, -1.0, 1.0), a: float = 1.0):
        super().__init__(rect)
        self.a = float(a)

    def height(self, x, y):
        return self.a * (x * x + y * y)

    def height_grad(self, x, y):
        return 2.0 * self.a * x, 2.0 * self.a * y

    def height_hessian(self, x, y):
        one = np.ones_like(x)
        return 2.0 * self.a * one, 0.0 * one, 2.0 * self.a * one

    def describe(self):
        return {"name": self.name, "rect": list(self.rect), "a": self.a}


class Plane(GraphSurface):
    """``z = 0``; mostly useful for tests."""

    name = "plane"

    def height(self, x, y):
        return np.zeros_like(x)

    def height_grad(self, x, y):
        return np.zeros_like(x), np.zeros_like(y)

    def height_hessian(self, x, y):
        z = np.zeros_like(x)
        return z, z, z


class ExpressionSurface(LevelSetSurface):
    """User level set given as an expression in ``x, y, z``.

    Closed expression surfaces are meshed by projecting an icosphere of
    radius ``radius`` onto the level set, which works for star-shaped
    surfaces around the origin.
    """

    name = "expression"

    def __init__(self, expression: str, radius: float = 1.0, closed: bool = True):
        import sympy as sp

        super().__init__(scale=2.0 * radius)
        self.expression = expression
        self.radius = float(radius)
        self.closed = closed
        xs = sp.symbols("x y z", real=True)
        expr = sp.sympify(expression, locals=dict(zip("xyz", xs)))
        grad = [sp.diff(expr, v) for v in xs]
        hess = [[sp.diff(gi, v) for v in xs] for gi in grad]
        self._psi = sp.lambdify(xs, expr, "numpy")
        self._grad = [sp.lambdify(xs, gi, "numpy") for gi in grad]
        self._hess = [[sp.lambdify(xs, h, "numpy") for h in row] for row in hess]

    @staticmethod
    def _eval(fn, x):
        v = fn(x[:, 0], x[:, 1], x[:, 2])
        return np.broadcast_to(np.asarray(v, dtype=float), (x.shape[0],))

    def psi(self, x):
        x = np.atleast_2d(x)
        return self._eval(self._psi, x).copy()

    def grad(self, x):
        x = np.atleast_2d(x)
        return np.stack([self._eval(g, x) for g in self._grad], axis=1)

    def hessian(self, x):
        x = np.atleast_2d(x)
        H = np.empty((x.shape[0], 3, 3))
        for i in range(3):
            for j in range(3):
                H[:, i, j] = self._eval(self._hess[i][j], x)
        return H

    def describe(self):
        return {"name": self.name, "expression": self.expression,
                "radius": self.radius, "closed": self.closed}


def make_surface(name: str, **kw) -> LevelSetSurface:
    """Construct a built-in surface by name."""
    name = name.lower()
    if name == "sphere":
        return Sphere(radius=kw.get("radius", 1.0))
    rect = kw.get("rect", (-1.0, 1.0, -1.0, 1.0))
    if name == "saddle":
        return Saddle(rect=rect, a=kw.get("a", 1.0))
    if name == "paraboloid":
        return Paraboloid(rect=rect, a=kw.get("a", 1.0))
    if name == "plane":
        return Plane(rect=rect)
    if name == "expression":
        return ExpressionSurface(kw["expression"], radius=kw.get("radius", 1.0),
                                 closed=kw.get("closed", True))
    raise ValueError(f"unknown surface {name!r}")
