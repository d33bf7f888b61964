"""Convex bodies: supports, membership, constructors, JSON descriptions.

Bodies expose a support oracle (value and attaining point), membership with a
tolerance, and a bounding ball. Smooth bodies additionally expose grad_h /
hess_h for the curvature pipeline; polytopes raise NotSmooth there.
"""
from __future__ import annotations

import numpy as np

from .errors import DegenerateEdge, InvalidSpec, NotSmooth
from .gauges import GaugeBody, _rows, _unit_sample, gauge_from_json

from scipy.spatial import ConvexHull, HalfspaceIntersection, QhullError


class ConvexBody:
    n: int

    def h(self, u):
        """Support function values (batch-aware)."""
        raise NotImplementedError

    def support(self, u):
        """Return (h_K(u), support point). Ties resolved deterministically."""
        vals, pts = self.support_batch(np.asarray(u, dtype=float)[None, :])
        return float(vals[0]), pts[0]

    def support_batch(self, U: np.ndarray):
        raise NotImplementedError

    def grad_h(self, u):
        raise NotSmooth(f"{type(self).__name__} has no smooth support data")

    def hess_h(self, u):
        raise NotSmooth(f"{type(self).__name__} has no smooth support data")

    def membership(self, x, tol: float = 1e-9) -> bool:
        raise NotImplementedError

    def bounding_ball(self) -> tuple[np.ndarray, float]:
        raise NotImplementedError

    def scale_radius(self) -> float:
        """Reference length scale: bounding-ball radius."""
        return self.bounding_ball()[1]

    def translate(self, t):
        raise NotImplementedError

    def rescale(self, s: float):
        """Scale about the origin by s > 0."""
        raise NotImplementedError

    def kernel_descriptor(self) -> dict | None:
        return None

    def to_json(self) -> dict:
        raise NotImplementedError


def _separation_margin(body: ConvexBody, x: np.ndarray, sample: int = 512,
                       iters: int = 80) -> float:
    """max over unit u of <x,u> - h_K(u); <= 0 iff x in K.

    Concave maximization by supergradient ascent from the best coarse-sample
    starts; accurate to ~1e-7 * scale for smooth bodies, a lower bound in
    general (documented approximation for hulls/sums).
    """
    x = np.asarray(x, dtype=float)
    U = _unit_sample(body.n, sample)
    vals = U @ x - np.atleast_1d(body.h(U))
    order = np.argsort(vals)[-4:]
    best = float(vals[order[-1]])
    for j in order:
        u = U[j].copy()
        step = 1.0
        fu = float(x @ u - body.h(u))
        for _ in range(iters):
            _, pt = body.support(u)
            g = x - pt  # supergradient of the 1-homogeneous objective
            gn = np.linalg.norm(g)
            if gn < 1e-15:
                break
            cand = u + step * g / gn
            cand /= np.linalg.norm(cand)
            fc = float(x @ cand - body.h(cand))
            if fc > fu:
                u, fu = cand, fc
            else:
                step *= 0.5
                if step < 1e-10:
                    break
        best = max(best, fu)
    return best


class VPolytope(ConvexBody):
    """Polytope given by vertices (rows). Facets via Qhull when full-dim."""

    def __init__(self, vertices):
        V = np.asarray(vertices, dtype=float)
        if V.ndim != 2 or V.shape[0] < 1:
            raise InvalidSpec("polytope needs a (m, n) vertex array")
        self.n = V.shape[1]
        self.vertices = V
        self._facets = None
        self._degenerate = None

    def _facet_data(self):
        if self._facets is None and self._degenerate is None:
            try:
                hull = ConvexHull(self.vertices)
                eq = hull.equations
                self._facets = (eq[:, :-1], -eq[:, -1])
                self._hull = hull
            except QhullError:
                self._degenerate = True
        return self._facets

    def h(self, u):
        U, single = _rows(u)
        out = np.max(U @ self.vertices.T, axis=1)
        return out[0] if single else out

    def support_batch(self, U):
        dots = U @ self.vertices.T
        idx = np.argmax(dots, axis=1)  # first occurrence = lowest vertex index
        return dots[np.arange(U.shape[0]), idx], self.vertices[idx]

    def membership(self, x, tol: float = 1e-9) -> bool:
        x = np.asarray(x, dtype=float)
        fac = self._facet_data()
        if fac is not None:
            A, b = fac
            return bool(np.max(A @ x - b) <= tol)
        # degenerate (not full-dimensional): feasibility LP over hull weights
        from scipy.optimize import linprog

        m = self.vertices.shape[0]
        res = linprog(np.zeros(m), A_eq=np.vstack([self.vertices.T, np.ones(m)]),
                      b_eq=np.append(x, 1.0), bounds=[(0, None)] * m,
                      method="highs")
        if res.status == 0:
            return True
        # tolerance pass: minimal l-inf residual
        return _separation_margin(self, x) <= tol

    def bounding_ball(self):
        c = np.mean(self.vertices, axis=0)
        return c, float(np.max(np.linalg.norm(self.vertices - c, axis=1)))

    def translate(self, t):
        return VPolytope(self.vertices + np.asarray(t, dtype=float))

    def rescale(self, s: float):
        return VPolytope(self.vertices * float(s))

    def kernel_descriptor(self):
        return {"kind": "polytope", "vertices": self.vertices}

    def to_json(self):
        return {"type": "polytope", "vertices": self.vertices.tolist()}


class Ball(ConvexBody):
    def __init__(self, center, radius: float):
        c = np.asarray(center, dtype=float)
        if radius <= 0:
            raise InvalidSpec("ball radius must be positive")
        self.n = c.size
        self.center = c
        self.radius = float(radius)

    def h(self, u):
        U, single = _rows(u)
        out = U @ self.center + self.radius * np.linalg.norm(U, axis=1)
        return out[0] if single else out

    def support_batch(self, U):
        nrm = np.linalg.norm(U, axis=1, keepdims=True)
        pts = self.center + self.radius * U / nrm
        return U @ self.center + self.radius * nrm[:, 0], pts

    def grad_h(self, u):
        U, single = _rows(u)
        out = self.center + self.radius * U / np.linalg.norm(U, axis=1, keepdims=True)
        return out[0] if single else out

    def hess_h(self, u):
        U, single = _rows(u)
        nrm = np.linalg.norm(U, axis=1)
        uh = U / nrm[:, None]
        out = self.radius * (np.eye(self.n)[None] - uh[:, :, None] * uh[:, None, :]) / nrm[:, None, None]
        return out[0] if single else out

    def membership(self, x, tol: float = 1e-9) -> bool:
        return bool(np.linalg.norm(np.asarray(x, dtype=float) - self.center) <= self.radius + tol)

    def bounding_ball(self):
        return self.center.copy(), self.radius

    def translate(self, t):
        return Ball(self.center + np.asarray(t, dtype=float), self.radius)

    def rescale(self, s: float):
        return Ball(self.center * float(s), self.radius * float(s))

    def kernel_descriptor(self):
        return {"kind": "ball", "center": self.center, "radius": self.radius}

    def to_json(self):
        return {"type": "ball", "center": self.center.tolist(), "radius": self.radius}


class EllipsoidBody(ConvexBody):
    """{x : (x-c)^T A^{-1} (x-c) <= 1} with h(u) = <c,u> + sqrt(u^T A u)."""

    def __init__(self, matrix, center=None):
        A = np.asarray(matrix, dtype=float)
        w = np.linalg.eigvalsh(A)
        if w[0] <= 0:
            raise InvalidSpec("ellipsoid matrix must be positive definite")
        self.n = A.shape[0]
        self.A = A
        self.Ainv = np.linalg.inv(A)
        self.center = np.zeros(self.n) if center is None else np.asarray(center, dtype=float)
        self._eigs = w

    def h(self, u):
        U, single = _rows(u)
        out = U @ self.center + np.sqrt(np.einsum("ij,jk,ik->i", U, self.A, U))
        return out[0] if single else out

    def support_batch(self, U):
        Au = U @ self.A
        root = np.sqrt(np.einsum("ij,ij->i", U, Au))
        return U @ self.center + root, self.center + Au / root[:, None]

    def grad_h(self, u):
        U, single = _rows(u)
        Au = U @ self.A
        root = np.sqrt(np.einsum("ij,ij->i", U, Au))
        out = self.center + Au / root[:, None]
        return out[0] if single else out

    def hess_h(self, u):
        U, single = _rows(u)
        Au = U @ self.A
        root = np.sqrt(np.einsum("ij,ij->i", U, Au))
        out = self.A[None] / root[:, None, None] - Au[:, :, None] * Au[:, None, :] / root[:, None, None] ** 3
        return out[0] if single else out

    def membership(self, x, tol: float = 1e-9) -> bool:
        d = np.asarray(x, dtype=float) - self.center
        return bool(np.sqrt(d @ self.Ainv @ d) <= 1.0 + tol)

    def bounding_ball(self):
        return self.center.copy(), float(np.sqrt(self._eigs[-1]))

    def translate(self, t):
        return EllipsoidBody(self.A, self.center + np.asarray(t, dtype=float))

    def rescale(self, s: float):
        s = float(s)
        return EllipsoidBody(self.A * s * s, self.center * s)

    def kernel_descriptor(self):
        return {"kind": "ellipsoid", "A": self.A, "center": self.center}

    def to_json(self):
        return {"type": "ellipsoid", "matrix": self.A.tolist(), "center": self.center.tolist()}


class SmoothBody(ConvexBody):
    """Body defined by callables for h (and optionally grad/hess/gauge).

    support points come from grad_h (unique for strictly convex bodies);
    membership uses the associated gauge when available, otherwise the
    separation oracle.
    """

    def __init__(self, n: int, h, grad_h=None, hess_h=None, gauge=None,
                 json_obj: dict | None = None):
        self.n = int(n)
        self._h = h
        self._grad = grad_h
        self._hess = hess_h
        self._gauge = gauge
        self._json = json_obj
        self._bball = None

    def h(self, u):
        return self._h(u)

    def support_batch(self, U):
        if self._grad is None:
            raise NotSmooth("SmoothBody without grad_h cannot produce support points")
        return np.atleast_1d(self._h(U)), np.atleast_2d(self._grad(U))

    def grad_h(self, u):
        if self._grad is None:
            raise NotSmooth("no gradient data")
        return self._grad(u)

    def hess_h(self, u):
        if self._hess is None:
            raise NotSmooth("no hessian data")
        return self._hess(u)

    def membership(self, x, tol: float = 1e-9) -> bool:
        if self._gauge is not None:
            return bool(np.atleast_1d(self._gauge(np.asarray(x, dtype=float)))[0] <= 1.0 + tol)
        return _separation_margin(self, x) <= tol

    def bounding_ball(self):
        if self._bball is None:
            hs = np.atleast_1d(self._h(_unit_sample(self.n)))
            self._bball = (np.zeros(self.n), 1.0001 * float(np.max(np.abs(hs))))
        return self._bball

    def translate(self, t):
        t = np.asarray(t, dtype=float)

        def h_t(u, f=self._h):
            return f(u) + np.asarray(u, dtype=float) @ t

        g = None
        if self._gauge is not None:
            g = lambda x, f=self._gauge: f(np.asarray(x, dtype=float) - t)  # noqa: E731
        return SmoothBody(
            self.n, h=h_t,
            grad_h=None if self._grad is None else (lambda u, f=self._grad: f(u) + t),
            hess_h=self._hess, gauge=g)

    def rescale(self, s: float):
        s = float(s)
        return SmoothBody(
            self.n,
            h=lambda u, f=self._h: s * f(u),
            grad_h=None if self._grad is None else (lambda u, f=self._grad: s * f(u)),
            hess_h=None if self._hess is None else (lambda u, f=self._hess: s * f(u)),
            gauge=None if self._gauge is None else (lambda x, f=self._gauge: f(np.asarray(x, dtype=float) / s)))

    def to_json(self):
        if self._json is None:
            raise InvalidSpec("this SmoothBody has no JSON form")
        return self._json


class HullWithPoints(ConvexBody):
    """conv(base body  union  finite point set)."""

    def __init__(self, base: ConvexBody, points):
        P = np.atleast_2d(np.asarray(points, dtype=float))
        if P.shape[1] != base.n:
            raise InvalidSpec("hull points dimension mismatch")
        self.n = base.n
        self.base = base
        self.points = P

    def h(self, u):
        U, single = _rows(u)
        hb = np.atleast_1d(self.base.h(U))
        hp = np.max(U @ self.points.T, axis=1)
        out = np.maximum(hb, hp)
        return out[0] if single else out

    def support_batch(self, U):
        hb, pb = self.base.support_batch(U)
        dots = U @ self.points.T
        j = np.argmax(dots, axis=1)
        hp = dots[np.arange(U.shape[0]), j]
        take_base = hb >= hp  # ties go to the base body
        vals = np.where(take_base, hb, hp)
        pts = np.where(take_base[:, None], pb, self.points[j])
        return vals, pts

    def membership(self, x, tol: float = 1e-9) -> bool:
        if self.base.membership(x, tol):
            return True
        return _separation_margin(self, x) <= tol

    def bounding_ball(self):
        c0, r0 = self.base.bounding_ball()
        r = max(r0, float(np.max(np.linalg.norm(self.points - c0, axis=1))))
        return c0, r

    def translate(self, t):
        t = np.asarray(t, dtype=float)
        return HullWithPoints(self.base.translate(t), self.points + t)

    def rescale(self, s: float):
        return HullWithPoints(self.base.rescale(s), self.points * float(s))

    def kernel_descriptor(self):
        b = self.base.kernel_descriptor()
        if b is not None and b["kind"] == "ball":
            return {"kind": "hull_ball_pts", "center": b["center"],
                    "radius": b["radius"], "points": self.points}
        return None

    def to_json(self):
        return {"type": "hull", "base": self.base.to_json(), "points": self.points.tolist()}


class MinkowskiCombination(ConvexBody):
    """sum_i coef_i * K_i with nonnegative coefficients."""

    def __init__(self, terms):
        terms = [(float(c), K) for c, K in terms if float(c) != 0.0]
        if not terms:
            raise InvalidSpec("minkowski combination needs a positive term")
        if any(c < 0 for c, _ in terms):
            raise InvalidSpec("minkowski coefficients must be nonnegative")
        self.n = terms[0][1].n
        if any(K.n != self.n for _, K in terms):
            raise InvalidSpec("dimension mismatch in minkowski combination")
        self.terms = terms

    def h(self, u):
        U, single = _rows(u)
        out = sum(c * np.atleast_1d(K.h(U)) for c, K in self.terms)
        return out[0] if single else out

    def support_batch(self, U):
        vals = np.zeros(U.shape[0])
        pts = np.zeros_like(U)
        for c, K in self.terms:
            v, p = K.support_batch(U)
            vals += c * v
            pts += c * p
        return vals, pts

    def membership(self, x, tol: float = 1e-9) -> bool:
        return _separation_margin(self, x) <= tol

    def bounding_ball(self):
        balls = [(c, *K.bounding_ball()) for c, K in self.terms]
        center = sum(c * ci for c, ci, _ in balls)
        radius = sum(c * ri for c, _, ri in balls)
        return center, float(radius)

    def translate(self, t):
        t = np.asarray(t, dtype=float)
        first = [(self.terms[0][0], self.terms[0][1].translate(t / self.terms[0][0]))]
        return MinkowskiCombination(first + self.terms[1:])

    def rescale(self, s: float):
        return MinkowskiCombination([(c * float(s), K) for c, K in self.terms])

    def to_json(self):
        return {"type": "minkowski", "terms": [[c, K.to_json()] for c, K in self.terms]}


def body_from_json(obj: dict) -> ConvexBody:
    if not isinstance(obj, dict) or "type" not in obj:
        raise InvalidSpec("body description must be an object with a 'type'")
    t = obj["type"]
    try:
        if t == "polytope":
            return VPolytope(obj["vertices"])
        if t == "ball":
            return Ball(obj["center"], obj["radius"])
        if t == "ellipsoid":
            return EllipsoidBody(obj["matrix"], obj.get("center"))
        if t in ("lp_ball", "smoothed_polytope"):
            g = gauge_from_json({k: v for k, v in obj.items() if k != "center"})
            body = g.as_body()
            body._json = dict(obj)
            if obj.get("center") is not None and np.linalg.norm(obj["center"]) != 0:
                body = body.translate(obj["center"])
            return body
        if t == "hull":
            return HullWithPoints(body_from_json(obj["base"]), obj["points"])
        if t == "minkowski":
            return MinkowskiCombination([(c, body_from_json(b)) for c, b in obj["terms"]])
    except KeyError as e:
        raise InvalidSpec(f"body description missing field {e}") from e
    raise InvalidSpec(f"unknown body type {t!r}")


def make_tangential_body(E: GaugeBody, spec: dict) -> ConvexBody:
    """Construct a body tangentially related to the gauge E.

    Kinds:
      homothet      {"scale": s, "shift": [...]}            -> order 0
      cap           {"apexes": [[...], ...]}                -> order 1
      circumscribed {"directions": [[...], ...]}            -> order n-1

    The returned body carries the construction's nominal order in
    `.nominal_order`. Cap apexes must lie strictly outside E with pairwise
    disjoint shadow regions (checked on a dense direction sample).
    """
    kind = spec.get("kind")
    if kind == "homothet":
        s = float(spec.get("scale", 1.0))
        if s <= 0:
            raise InvalidSpec("homothet scale must be positive")
        body = E.as_body().rescale(s)
        shift = spec.get("shift")
        if shift is not None:
            body = body.translate(shift)
        body.nominal_order = 0
        return body
    if kind == "cap":
        apexes = np.atleast_2d(np.asarray(spec["apexes"], dtype=float))
        g = np.atleast_1d(E.gauge(apexes))
        if np.any(g <= 1.0 + 1e-9):
            raise InvalidSpec("cap apexes must lie strictly outside E")
        U = _unit_sample(E.n)
        hE = np.atleast_1d(E.h(U))
        shadows = (apexes @ U.T) > hE[None, :]  # directions seeing each apex
        for i in range(len(apexes)):
            for j in range(i + 1, len(apexes)):
                if np.any(shadows[i] & shadows[j]):
                    raise InvalidSpec("cap shadow regions overlap; caps are not independent")
        body = HullWithPoints(E.as_body(), apexes)
        body.nominal_order = 1
        return body
    if kind == "circumscribed":
        dirs = np.atleast_2d(np.asarray(spec["directions"], dtype=float))
        nrm = np.linalg.norm(dirs, axis=1)
        if np.any(nrm == 0):
            raise DegenerateEdge("zero direction in circumscribed construction")
        dirs = dirs / nrm[:, None]
        offs = np.atleast_1d(E.h(dirs))
        halfspaces = np.hstack([dirs, -offs[:, None]])
        try:
            hi = HalfspaceIntersection(halfspaces, np.zeros(E.n))
        except QhullError as e:
            raise InvalidSpec(f"circumscribed directions do not bound a polytope: {e}") from e
        verts = np.unique(np.round(hi.intersections, 12), axis=0)
        body = VPolytope(verts)
        body.nominal_order = E.n - 1
        return body
    raise InvalidSpec(f"unknown tangential construction {kind!r}")
