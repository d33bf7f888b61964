"""Gauge bodies: smooth, strictly convex bodies with the origin interior.

A gauge body E is described by its support function h_E and its gauge
(Minkowski functional) g_E(w) = min{t > 0 : w in t*E}. Both are positively
1-homogeneous; all evaluators here accept a single vector or a batch of
row vectors and are homogeneous-safe (no unit-norm requirement unless
stated).

Key identities used throughout the package:

* reverse Gauss map  x_E(u) = grad h_E(u)   (boundary point with normal u)
* Gauss map          u_E(x) = grad g_E(x) / |grad g_E(x)|   for x on bd E
* gauge gradient     grad g_E(w) = u / h_E(u),  u = u_E(w / g_E(w))

The last identity follows from the support inequality
g_E(w') >= <w', u>/h_E(u) with equality at w' = w.
"""
from __future__ import annotations

import numpy as np

from .errors import InvalidSpec, NoConvergence, NotOnBoundary

_SPHERE_CACHE: dict[tuple[int, int], np.ndarray] = {}


def _unit_sample(n: int, count: int = 4096) -> np.ndarray:
    """Deterministic quasi-uniform sample of the unit sphere (for bounds)."""
    key = (n, count)
    if key not in _SPHERE_CACHE:
        if n == 2:
            th = (np.arange(count) + 0.5) * (2 * np.pi / count)
            pts = np.stack([np.cos(th), np.sin(th)], axis=1)
        else:
            g = np.random.Generator(np.random.Philox(np.random.SeedSequence(918273)))
            v = g.standard_normal((count, n))
            pts = v / np.linalg.norm(v, axis=1, keepdims=True)
        _SPHERE_CACHE[key] = pts
    return _SPHERE_CACHE[key]


def _rows(x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return x[None, :], True
    return x, False


class GaugeBody:
    """Base class; subclasses fill in h / gauge evaluators."""

    n: int

    # -- support function side -------------------------------------------
    def h(self, u):
        raise NotImplementedError

    def grad_h(self, u):
        raise NotImplementedError

    def hess_h(self, u):
        """Euclidean Hessian of h at u (batched: (m, n, n)). Singular
        directions may raise or return inf entries; callers integrating
        curvature handle integrable singularities."""
        raise NotImplementedError

    # -- gauge side --------------------------------------------------------
    def gauge(self, w):
        raise NotImplementedError

    def grad_gauge(self, w):
        """grad g_E; computed as u/h_E(u) unless a closed form exists."""
        W, single = _rows(w)
        g = np.atleast_1d(self.gauge(W))
        if np.any(g <= 0):
            raise InvalidSpec("grad_gauge undefined at the origin")
        u = self.gauss_map(W / g[:, None], tol=np.inf)
        out = u / np.atleast_1d(self.h(u))[:, None]
        return out[0] if single else out

    # -- boundary maps -----------------------------------------------------
    def gauss_map(self, x, tol: float = 1e-9):
        """Outward unit normal of bd E at x. Raises NotOnBoundary when
        |g_E(x) - 1| > tol."""
        X, single = _rows(x)
        if np.isfinite(tol):
            g = np.atleast_1d(self.gauge(X))
            if np.any(np.abs(g - 1.0) > tol):
                raise NotOnBoundary(f"gauge value off boundary by {np.max(np.abs(g-1.0)):.3e}")
        u = self._normal_at(X)
        out = u / np.linalg.norm(u, axis=1, keepdims=True)
        return out[0] if single else out

    def _normal_at(self, X: np.ndarray) -> np.ndarray:
        """Unnormalized outward normal at boundary points (batch)."""
        raise NotImplementedError

    def reverse_gauss(self, u):
        """Boundary point of E with outward normal u (= grad h_E(u))."""
        U, single = _rows(u)
        nrm = np.linalg.norm(U, axis=1)
        if np.any(np.abs(nrm - 1.0) > 1e-9):
            raise InvalidSpec("reverse_gauss expects unit directions")
        out = self.grad_h(U / nrm[:, None])
        return out[0] if single else out

    # -- metric constants --------------------------------------------------
    def inradius(self) -> float:
        """r0 with r0*B^n contained in E."""
        raise NotImplementedError

    def outradius(self) -> float:
        """max_u h_E(u) (circumradius about o)."""
        raise NotImplementedError

    def as_body(self):
        from .bodies import SmoothBody

        return SmoothBody(self.n, h=self.h, grad_h=self.grad_h,
                          hess_h=self.hess_h, gauge=self.gauge)

    def kernel_descriptor(self) -> dict | None:
        """Flat descriptor for the compiled/vectorized kernels, or None if
        this gauge only supports the generic python path."""
        return None

    def to_json(self) -> dict:
        raise NotImplementedError


class BallGauge(GaugeBody):
    """Euclidean ball of radius r centered at the origin."""

    def __init__(self, radius: float = 1.0, n: int = 2):
        if radius <= 0:
            raise InvalidSpec("ball radius must be positive")
        self.n = int(n)
        self.radius = float(radius)

    def h(self, u):
        U, single = _rows(u)
        out = self.radius * np.linalg.norm(U, axis=1)
        return out[0] if single else out

    def grad_h(self, u):
        U, single = _rows(u)
        out = self.radius * U / np.linalg.norm(U, axis=1, keepdims=True)
        return out[0] if single else out

    def hess_h(self, u):
        U, single = _rows(u)
        nrm = np.linalg.norm(U, axis=1)
        uh = U / nrm[:, None]
        eye = np.eye(self.n)
        out = self.radius * (eye[None] - uh[:, :, None] * uh[:, None, :]) / nrm[:, None, None]
        return out[0] if single else out

    def gauge(self, w):
        W, single = _rows(w)
        out = np.linalg.norm(W, axis=1) / self.radius
        return out[0] if single else out

    def grad_gauge(self, w):
        W, single = _rows(w)
        out = W / (self.radius * np.linalg.norm(W, axis=1, keepdims=True))
        return out[0] if single else out

    def _normal_at(self, X):
        return X

    def inradius(self):
        return self.radius

    def outradius(self):
        return self.radius

    def as_body(self):
        from .bodies import Ball

        return Ball(np.zeros(self.n), self.radius)

    def kernel_descriptor(self):
        return {"kind": "ball", "radius": self.radius}

    def to_json(self):
        return {"type": "ball", "center": [0.0] * self.n, "radius": self.radius}


class EllipsoidGauge(GaugeBody):
    """Centered ellipsoid with support function h(u) = sqrt(u^T A u).

    A is SPD; the body is {x : x^T A^{-1} x <= 1} (A = M M^T for E = M B^n).
    """

    def __init__(self, matrix):
        A = np.asarray(matrix, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise InvalidSpec("ellipsoid matrix must be square")
        if not np.allclose(A, A.T, atol=1e-12 * max(1.0, np.abs(A).max())):
            raise InvalidSpec("ellipsoid matrix must be symmetric")
        w = np.linalg.eigvalsh(A)
        if w[0] <= 0:
            raise InvalidSpec("ellipsoid matrix must be positive definite")
        self.n = A.shape[0]
        self.A = A
        self.Ainv = np.linalg.inv(A)
        self._eigs = w

    def h(self, u):
        U, single = _rows(u)
        out = np.sqrt(np.einsum("ij,jk,ik->i", U, self.A, U))
        return out[0] if single else out

    def grad_h(self, u):
        U, single = _rows(u)
        Au = U @ self.A
        hh = np.sqrt(np.einsum("ij,ij->i", U, Au))
        out = Au / hh[:, None]
        return out[0] if single else out

    def hess_h(self, u):
        U, single = _rows(u)
        Au = U @ self.A
        hh = np.sqrt(np.einsum("ij,ij->i", U, Au))
        out = self.A[None] / hh[:, None, None] - Au[:, :, None] * Au[:, None, :] / hh[:, None, None] ** 3
        return out[0] if single else out

    def gauge(self, w):
        W, single = _rows(w)
        out = np.sqrt(np.einsum("ij,jk,ik->i", W, self.Ainv, W))
        return out[0] if single else out

    def grad_gauge(self, w):
        W, single = _rows(w)
        Aw = W @ self.Ainv
        g = np.sqrt(np.einsum("ij,ij->i", W, Aw))
        out = Aw / g[:, None]
        return out[0] if single else out

    def _normal_at(self, X):
        return X @ self.Ainv

    def inradius(self):
        return float(np.sqrt(self._eigs[0]))

    def outradius(self):
        return float(np.sqrt(self._eigs[-1]))

    def as_body(self):
        from .bodies import EllipsoidBody

        return EllipsoidBody(self.A, np.zeros(self.n))

    def kernel_descriptor(self):
        return {"kind": "ellipsoid", "A": self.A, "Ainv": self.Ainv}

    def to_json(self):
        return {"type": "ellipsoid", "matrix": self.A.tolist(),
                "center": [0.0] * self.n}


class LpBallGauge(GaugeBody):
    """Anisotropically scaled l^p ball {x : sum |x_i/a_i|^p <= 1}, p > 1.

    Support function h(u) = (sum (a_i |u_i|)^q)^{1/q} with 1/p + 1/q = 1.
    For p > 2 the boundary has vanishing curvature on the axes; hess_h has
    an integrable singularity there (handled by adaptive quadrature).
    """

    def __init__(self, p: float, scales):
        if not (1.0 < p < np.inf):
            raise InvalidSpec("lp_ball requires 1 < p < inf")
        a = np.asarray(scales, dtype=float)
        if a.ndim != 1 or np.any(a <= 0):
            raise InvalidSpec("lp_ball scales must be positive")
        self.n = a.size
        self.p = float(p)
        self.q = p / (p - 1.0)
        self.scales = a

    def h(self, u):
        U, single = _rows(u)
        out = np.sum((self.scales * np.abs(U)) ** self.q, axis=1) ** (1.0 / self.q)
        return out[0] if single else out

    def grad_h(self, u):
        U, single = _rows(u)
        q = self.q
        t = self.scales * np.abs(U)
        hq = np.sum(t ** q, axis=1)
        hh = hq ** (1.0 / q)
        # d/du_i (sum (a|u|)^q)^{1/q} = a_i^q |u_i|^{q-1} sgn(u_i) h^{1-q}
        out = (self.scales ** q) * np.abs(U) ** (q - 1.0) * np.sign(U) * hh[:, None] ** (1.0 - q)
        return out[0] if single else out

    def hess_h(self, u):
        U, single = _rows(u)
        q = self.q
        c = self.scales ** q
        absu = np.abs(U)
        hq = np.sum(c * absu ** q, axis=1)
        h1 = hq ** (1.0 / q - 1.0)
        h2 = hq ** (1.0 / q - 2.0)
        g = c * absu ** (q - 1.0) * np.sign(U)
        with np.errstate(divide="ignore"):
            diag = c * absu ** (q - 2.0)
        m = U.shape[0]
        out = np.zeros((m, self.n, self.n))
        idx = np.arange(self.n)
        out[:, idx, idx] = diag * h1[:, None]
        out -= g[:, :, None] * g[:, None, :] * h2[:, None, None]
        out *= (q - 1.0)
        return out[0] if single else out

    def gauge(self, w):
        W, single = _rows(w)
        out = np.sum(np.abs(W / self.scales) ** self.p, axis=1) ** (1.0 / self.p)
        return out[0] if single else out

    def grad_gauge(self, w):
        W, single = _rows(w)
        p = self.p
        t = np.abs(W / self.scales)
        gp = np.sum(t ** p, axis=1)
        gg = gp ** (1.0 / p)
        out = t ** (p - 1.0) * np.sign(W) / self.scales * gg[:, None] ** (1.0 - p)
        return out[0] if single else out

    def _normal_at(self, X):
        t = np.abs(X / self.scales)
        return t ** (self.p - 1.0) * np.sign(X) / self.scales

    def inradius(self):
        q = self.q
        if q <= 2.0:
            return float(np.min(self.scales))
        s = 2.0 * q / (2.0 - q)  # negative exponent mean
        return float(np.sum(self.scales ** s) ** (1.0 / s))

    def outradius(self):
        q = self.q
        if q >= 2.0:
            return float(np.max(self.scales))
        s = 2.0 * q / (2.0 - q)
        return float(np.sum(self.scales ** s) ** (1.0 / s))

    def kernel_descriptor(self):
        return {"kind": "lp", "p": self.p, "inv_scales": 1.0 / self.scales}

    def to_json(self):
        return {"type": "lp_ball", "p": self.p, "scales": self.scales.tolist()}


class SmoothedPolytopeGauge(GaugeBody):
    """Strictly convex smoothing of a polytope containing the origin.

    h(u) = (sum_i <v_i, u>_+^4)^{1/4} + eps * |u|.

    The quartic soft-max of the vertex functionals is a support function that
    is C^2 away from 0 and approximates max_i <v_i, u> from below within a
    factor m^{-1/4}; adding eps*|u| makes the Hessian on u-perp positive
    definite everywhere. eps below 1e-3 is rejected: the gauge Newton solve
    degrades as the body approaches the polytope.
    """

    MIN_EPS = 1e-3

    def __init__(self, vertices, epsilon: float):
        V = np.asarray(vertices, dtype=float)
        if V.ndim != 2 or V.shape[0] < V.shape[1] + 1:
            raise InvalidSpec("smoothed_polytope needs at least n+1 vertices")
        if epsilon < self.MIN_EPS:
            raise InvalidSpec(f"epsilon must be >= {self.MIN_EPS}")
        self.n = V.shape[1]
        self.vertices = V
        self.eps = float(epsilon)
        hs = self.h(_unit_sample(self.n))
        if np.min(hs) <= self.eps * 1.0001:
            raise InvalidSpec("polytope must contain the origin in its interior")
        self._r0 = 0.999 * float(np.min(hs))
        self._rout = 1.001 * float(np.max(hs))

    def _parts(self, U):
        t = U @ self.vertices.T
        np.maximum(t, 0.0, out=t)
        return t

    def h(self, u):
        U, single = _rows(u)
        t = self._parts(U)
        s = np.sum(t ** 4, axis=1) ** 0.25
        out = s + self.eps * np.linalg.norm(U, axis=1)
        return out[0] if single else out

    def grad_h(self, u):
        U, single = _rows(u)
        t = self._parts(U)
        S = np.sum(t ** 4, axis=1)
        coef = np.where(S > 0, S, 1.0) ** -0.75
        core = (t ** 3 * coef[:, None]) @ self.vertices
        core[S == 0] = 0.0
        out = core + self.eps * U / np.linalg.norm(U, axis=1, keepdims=True)
        return out[0] if single else out

    def hess_h(self, u):
        U, single = _rows(u)
        m = U.shape[0]
        t = self._parts(U)
        S = np.sum(t ** 4, axis=1)
        Sm = np.where(S > 0, S, 1.0)
        g = (t ** 3 * Sm[:, None] ** -0.75) @ self.vertices
        out = 3.0 * np.einsum("mi,ia,ib->mab", t ** 2, self.vertices, self.vertices) * Sm[:, None, None] ** -0.75
        out -= 3.0 * g[:, :, None] * g[:, None, :] * Sm[:, None, None] ** -0.25
        out[S == 0] = 0.0
        nrm = np.linalg.norm(U, axis=1)
        uh = U / nrm[:, None]
        out += self.eps * (np.eye(self.n)[None] - uh[:, :, None] * uh[:, None, :]) / nrm[:, None, None]
        return out[0] if single else out

    def gauge(self, w):
        W, single = _rows(w)
        g, _ = self._solve_gauge(W)
        return g[0] if single else g

    def _normal_at(self, X):
        _, u = self._solve_gauge(X)
        return u

    def grad_gauge(self, w):
        W, single = _rows(w)
        _, u = self._solve_gauge(W)
        out = u / np.atleast_1d(self.h(u))[:, None]
        return out[0] if single else out

    def _solve_gauge(self, W: np.ndarray, tol: float = 1e-13, maxiter: int = 80):
        """Solve s * grad_h(u) = w, |u| = 1 by damped Newton (batched).

        Returns (s, u): s = g_E(w), u the outward unit normal at w/s.
        """
        nrm = np.linalg.norm(W, axis=1)
        if np.any(nrm == 0):
            raise InvalidSpec("gauge undefined at the origin")
        n = self.n
        u = W / nrm[:, None]
        s = nrm / np.atleast_1d(self.h(u))
        scale = np.maximum(nrm, 1e-300)
        for it in range(maxiter):
            gh = np.atleast_2d(self.grad_h(u))
            F = s[:, None] * gh - W
            cons = 0.5 * (np.einsum("ij,ij->i", u, u) - 1.0)
            res = np.maximum(np.linalg.norm(F, axis=1) / scale, np.abs(cons))
            if np.all(res < tol):
                break
            H = np.atleast_3d(self.hess_h(u).reshape(-1, n, n))
            J = np.zeros((W.shape[0], n + 1, n + 1))
            J[:, :n, :n] = s[:, None, None] * H
            J[:, :n, n] = gh
            J[:, n, :n] = u
            rhs = np.concatenate([-F, -cons[:, None]], axis=1)
            try:
                step = np.linalg.solve(J, rhs[:, :, None])[:, :, 0]
            except np.linalg.LinAlgError:
                step = np.einsum("mij,mj->mi", np.linalg.pinv(J), rhs)
            # backtracking damping on the merit |F|
            tries, lam = 0, np.ones(W.shape[0])
            base = np.linalg.norm(F, axis=1) + np.abs(cons) * scale
            while True:
                u_new = u + lam[:, None] * step[:, :n]
                s_new = s + lam * step[:, n]
                un = np.linalg.norm(u_new, axis=1)
                bad = (un < 1e-12) | (s_new <= 0)
                u_try = np.where(bad[:, None], u, u_new / np.maximum(un, 1e-12)[:, None])
                s_try = np.where(bad, s, s_new)
                F_try = s_try[:, None] * np.atleast_2d(self.grad_h(u_try)) - W
                merit = np.linalg.norm(F_try, axis=1)
                worse = merit > base * (1.0 - 1e-4 * lam) + 1e-300
                if not np.any(worse) or tries >= 6:
                    u, s = u_try, s_try
                    break
                lam = np.where(worse, lam * 0.5, lam)
                tries += 1
        else:
            raise NoConvergence(maxiter, float(np.max(res)), "gauge Newton solve stalled")
        return s, u

    def inradius(self):
        return self._r0

    def outradius(self):
        return self._rout

    def to_json(self):
        return {"type": "smoothed_polytope", "vertices": self.vertices.tolist(),
                "epsilon": self.eps}


def gauge_from_json(obj: dict) -> GaugeBody:
    """Build a gauge body from its JSON description."""
    if not isinstance(obj, dict) or "type" not in obj:
        raise InvalidSpec("gauge description must be an object with a 'type'")
    t = obj["type"]
    try:
        if t == "ball":
            c = obj.get("center")
            if c is not None and np.linalg.norm(c) != 0.0:
                raise InvalidSpec("gauge ball must be centered at the origin")
            n = len(c) if c is not None else int(obj.get("n", 2))
            return BallGauge(obj["radius"], n=n)
        if t == "ellipsoid":
            c = obj.get("center")
            if c is not None and np.linalg.norm(c) != 0.0:
                raise InvalidSpec("gauge ellipsoid must be centered at the origin")
            return EllipsoidGauge(obj["matrix"])
        if t == "lp_ball":
            return LpBallGauge(obj["p"], obj["scales"])
        if t == "smoothed_polytope":
            return SmoothedPolytopeGauge(obj["vertices"], obj["epsilon"])
    except KeyError as e:
        raise InvalidSpec(f"gauge description missing field {e}") from e
    raise InvalidSpec(f"unknown gauge type {t!r}")
