"""Batched gauge-distance solves, pure numpy implementation.

Solves, for each row x of X,

    d = min_{y in K} g_E(x - y)

by pairwise Frank-Wolfe over a bounded atom set (polytopes, hulls) or plain
Frank-Wolfe with line search (strictly convex bodies), stopping on the
duality gap <grad g_E(w), s - y> <= tol which certifies d - d* <= tol.

The compiled extension (_kernels.pyx) mirrors these semantics point-by-point;
this module is the fallback and the reference for equivalence tests. Closed
forms replace the iteration where exact projections are available (ball body
with ball gauge; hull of a ball and one apex with ball gauge).
"""
from __future__ import annotations

import numpy as np

CAP = 32  # atom slots per point in pairwise mode


def _finish(out, ids, d, P, gap, it, conv):
    out["d"][ids] = d
    out["P"][ids] = P
    out["gap"][ids] = gap
    out["iters"][ids] = it
    out["conv"][ids] = conv


# ---------------------------------------------------------------------------
# gauge adapters: (value, gradient, line search) triples over descriptors
# ---------------------------------------------------------------------------

def _gauge_fns(gauge):
    """Return (g, grad_g, line_search) callables for a descriptor or object.

    line_search(W, D, gmax) returns per-row gamma in [0, gmax] minimizing
    g(W - gamma * D).
    """
    if isinstance(gauge, dict):
        kind = gauge["kind"]
        if kind == "ball":
            r = float(gauge["radius"])

            def g(W):
                return np.linalg.norm(W, axis=1) / r

            def gg(W):
                return W / (r * np.linalg.norm(W, axis=1, keepdims=True))

            def ls(W, D, gmax):
                den = np.einsum("ij,ij->i", D, D)
                num = np.einsum("ij,ij->i", W, D)
                gam = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
                return np.clip(gam, 0.0, gmax)

            return g, gg, ls
        if kind == "ellipsoid":
            M = np.asarray(gauge["Ainv"], dtype=float)

            def g(W):
                return np.sqrt(np.einsum("ij,jk,ik->i", W, M, W))

            def gg(W):
                WM = W @ M
                return WM / np.sqrt(np.einsum("ij,ij->i", W, WM))[:, None]

            def ls(W, D, gmax):
                DM = D @ M
                den = np.einsum("ij,ij->i", D, DM)
                num = np.einsum("ij,ij->i", W, DM)
                gam = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
                return np.clip(gam, 0.0, gmax)

            return g, gg, ls
        if kind == "lp":
            p = float(gauge["p"])
            ia = np.asarray(gauge["inv_scales"], dtype=float)

            def g(W):
                return np.sum(np.abs(W * ia) ** p, axis=1) ** (1.0 / p)

            def gg(W):
                t = np.abs(W * ia)
                gp = np.sum(t ** p, axis=1)
                gv = gp ** (1.0 / p)
                return t ** (p - 1.0) * np.sign(W) * ia * gv[:, None] ** (1.0 - p)

            if p == 4.0:
                def ls(W, D, gmax):
                    # phi(gamma) = sum ((w - gamma d)/a)^4 is a quartic;
                    # its derivative is proportional to
                    # q(gamma) = sum dh*(wh - gamma dh)^3, strictly decreasing.
                    wh = W * ia
                    dh = D * ia
                    t3 = (wh - gmax[:, None] * dh)
                    qhi = np.einsum("ij,ij->i", dh, t3 * t3 * t3)
                    lo = np.zeros(len(W))
                    hi = gmax.astype(float).copy()
                    take_hi = qhi >= 0.0
                    for _ in range(48):
                        mid = 0.5 * (lo + hi)
                        t = wh - mid[:, None] * dh
                        qm = np.einsum("ij,ij->i", dh, t * t * t)
                        pos = qm > 0.0
                        lo = np.where(pos, mid, lo)
                        hi = np.where(pos, hi, mid)
                    gam = 0.5 * (lo + hi)
                    return np.where(take_hi, gmax, gam)
            else:
                def ls(W, D, gmax):
                    wh = W * ia
                    dh = D * ia

                    def q(gam):
                        t = wh - gam[:, None] * dh
                        return np.einsum("ij,ij->i", dh, np.abs(t) ** (p - 1.0) * np.sign(t))

                    lo = np.zeros(len(W))
                    hi = gmax.astype(float).copy()
                    take_hi = q(hi) >= 0.0
                    for _ in range(60):
                        mid = 0.5 * (lo + hi)
                        pos = q(mid) > 0.0
                        lo = np.where(pos, mid, lo)
                        hi = np.where(pos, hi, mid)
                    return np.where(take_hi, gmax, 0.5 * (lo + hi))

            return g, gg, ls
        raise ValueError(f"unsupported gauge descriptor {kind!r}")

    # python gauge object: batched evaluators + derivative bisection
    def g(W):
        return np.atleast_1d(gauge.gauge(W))

    def gg(W):
        return np.atleast_2d(gauge.grad_gauge(W))

    def ls(W, D, gmax):
        lo = np.zeros(len(W))
        hi = gmax.astype(float).copy()
        dhi = np.einsum("ij,ij->i", gg(W - hi[:, None] * D), D)
        take_hi = dhi >= 0.0  # derivative of -phi; phi' = -<grad g, D>
        for _ in range(44):
            mid = 0.5 * (lo + hi)
            pos = np.einsum("ij,ij->i", gg(W - mid[:, None] * D), D) > 0.0
            lo = np.where(pos, mid, lo)
            hi = np.where(pos, hi, mid)
        return np.where(take_hi, gmax, 0.5 * (lo + hi))

    return g, gg, ls


# ---------------------------------------------------------------------------
# body adapters: support oracle, warm start, mode
# ---------------------------------------------------------------------------

def _body_fns(body):
    """Return (support, warm_start, curve_mode) for a descriptor or object."""
    if isinstance(body, dict):
        kind = body["kind"]
        if kind == "polytope":
            V = np.asarray(body["vertices"], dtype=float)

            def support(G):
                dots = G @ V.T
                idx = np.argmax(dots, axis=1)
                return V[idx]

            def warm(X):
                d2 = np.einsum("ij,ij->i", V, V)[None, :] - 2.0 * (X @ V.T)
                return V[np.argmin(d2, axis=1)]

            return support, warm, False
        if kind == "ball":
            c = np.asarray(body["center"], dtype=float)
            R = float(body["radius"])

            def support(G):
                return c + R * G / np.linalg.norm(G, axis=1, keepdims=True)

            def warm(X):
                W = X - c
                nrm = np.linalg.norm(W, axis=1, keepdims=True)
                W = np.where(nrm > 0, W, _e1(X.shape[1])[None, :])
                nrm = np.linalg.norm(W, axis=1, keepdims=True)
                return c + R * W / nrm

            return support, warm, True
        if kind == "ellipsoid":
            A = np.asarray(body["A"], dtype=float)
            c = np.asarray(body.get("center", np.zeros(A.shape[0])), dtype=float)

            def support(G):
                GA = G @ A
                return c + GA / np.sqrt(np.einsum("ij,ij->i", G, GA))[:, None]

            def warm(X):
                W = X - c
                bad = np.einsum("ij,ij->i", W, W) == 0.0
                W[bad] = _e1(X.shape[1])
                return support(W)

            return support, warm, True
        if kind == "hull_ball_pts":
            c = np.asarray(body["center"], dtype=float)
            R = float(body["radius"])
            P = np.atleast_2d(np.asarray(body["points"], dtype=float))

            def support(G):
                nrm = np.linalg.norm(G, axis=1)
                hb = G @ c + R * nrm
                dots = G @ P.T
                j = np.argmax(dots, axis=1)
                hp = dots[np.arange(len(G)), j]
                take_base = hb >= hp
                sb = c + R * G / np.maximum(nrm, 1e-300)[:, None]
                return np.where(take_base[:, None], sb, P[j])

            def warm(X):
                W = X - c
                bad = np.einsum("ij,ij->i", W, W) == 0.0
                W[bad] = _e1(X.shape[1])
                return support(W)

            return support, warm, False
        raise ValueError(f"unsupported body descriptor {kind!r}")

    # python body object
    def support(G):
        return body.support_batch(G)[1]

    def warm(X):
        c = body.bounding_ball()[0]
        W = X - c
        bad = np.einsum("ij,ij->i", W, W) == 0.0
        if np.any(bad):
            W[bad] = _e1(X.shape[1])
        return support(W)

    from .bodies import Ball, EllipsoidBody, SmoothBody

    curve = isinstance(body, (Ball, EllipsoidBody, SmoothBody))
    return support, warm, curve


def _e1(n: int) -> np.ndarray:
    e = np.zeros(n)
    e[0] = 1.0
    return e


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------

def _closed_ball_ball(body, gauge, X):
    c = np.asarray(body["center"], dtype=float)
    R = float(body["radius"])
    r = float(gauge["radius"])
    W = X - c
    nrm = np.linalg.norm(W, axis=1)
    out_d = np.maximum(nrm - R, 0.0) / r
    inside = nrm <= R
    safe = np.maximum(nrm, 1e-300)
    P = np.where(inside[:, None], X, c + R * W / safe[:, None])
    return {"d": out_d, "P": P, "gap": np.zeros(len(X)),
            "iters": np.zeros(len(X), dtype=np.int64), "conv": np.ones(len(X), dtype=bool)}


def cap_distance_2d(xi, eta, R, L):
    """Euclidean distance from (xi, eta>=0) to conv(disc(R) + apex (L,0))."""
    ct = R / L
    st = np.sqrt(1.0 - ct * ct)
    rr = np.hypot(xi, eta)
    sphere_side = eta * ct >= xi * st  # polar angle >= tangency angle
    d_sphere = np.maximum(rr - R, 0.0)
    # lateral edge: from tangency point q = R*(ct, st) toward apex (L, 0)
    ex = (L - R * ct)
    ey = (0.0 - R * st)
    elen = np.sqrt(L * L - R * R)
    ex, ey = ex / elen, ey / elen
    proj = (xi - R * ct) * ex + (eta - R * st) * ey
    gline = xi * ct + eta * st - R  # signed distance to the tangent line
    d_apex = np.hypot(xi - L, eta)
    d_edge = np.where(proj <= 0.0, np.hypot(xi - R * ct, eta - R * st),
                      np.where(proj >= elen, d_apex, np.abs(gline)))
    d_cone = np.where(gline <= 0.0, 0.0, d_edge)
    return np.where(sphere_side, d_sphere, d_cone)


def _closed_cap_ball(body, gauge, X):
    c = np.asarray(body["center"], dtype=float)
    R = float(body["radius"])
    a = np.asarray(body["points"], dtype=float)[0]
    r = float(gauge["radius"])
    axis = a - c
    L = np.linalg.norm(axis)
    e = axis / L
    W = X - c
    xi = W @ e
    perp = W - xi[:, None] * e[None, :]
    eta = np.linalg.norm(perp, axis=1)
    d = cap_distance_2d(xi, eta, R, L)
    # projection: recompute the 2-D nearest point, map back
    ct, st = R / L, np.sqrt(1.0 - (R / L) ** 2)
    rr = np.maximum(np.hypot(xi, eta), 1e-300)
    sphere_side = eta * ct >= xi * st
    qs_xi = R * xi / rr
    qs_eta = R * eta / rr
    elen = np.sqrt(L * L - R * R)
    ex, ey = (L - R * ct) / elen, (0.0 - R * st) / elen
    proj = np.clip((xi - R * ct) * ex + (eta - R * st) * ey, 0.0, elen)
    qe_xi = R * ct + proj * ex
    qe_eta = R * st + proj * ey
    q_xi = np.where(sphere_side, qs_xi, qe_xi)
    q_eta = np.where(sphere_side, qs_eta, qe_eta)
    inside = d <= 0.0
    f = np.zeros_like(W)
    pos = eta > 0
    f[pos] = perp[pos] / eta[pos, None]
    # eta == 0 off-axis direction is irrelevant: q_eta is 0 there unless the
    # nearest point is off-axis, which cannot happen for an axial query
    P = c + q_xi[:, None] * e[None, :] + q_eta[:, None] * f
    P = np.where(inside[:, None], X, P)
    return {"d": d / r, "P": P, "gap": np.zeros(len(X)),
            "iters": np.zeros(len(X), dtype=np.int64), "conv": np.ones(len(X), dtype=bool)}


# ---------------------------------------------------------------------------
# main driver
# ---------------------------------------------------------------------------

def edist_batch(body, gauge, X, tol: float = 1e-9, maxiter: int = 10000,
                scale: float | None = None, exit_levels=None, exit_cells=None):
    """Batched gauge distance. Returns dict(d, P, gap, iters, conv).

    body / gauge are kernel descriptors (dicts) or python objects.

    exit_levels (sorted) with exit_cells (len(levels)+1 booleans) enable
    certificate exits: a point stops once [d_up - gap, d_up] fits inside one
    level cell flagged True. The returned d then only classifies the point
    against the levels (it is an upper bound within gap of the optimum);
    cells flagged False always run to full gap convergence.
    """
    X = np.ascontiguousarray(np.asarray(X, dtype=float))
    m, n = X.shape
    if isinstance(body, dict) and isinstance(gauge, dict):
        if body["kind"] == "ball" and gauge["kind"] == "ball":
            return _closed_ball_ball(body, gauge, X)
        if (body["kind"] == "hull_ball_pts" and gauge["kind"] == "ball"
                and np.atleast_2d(body["points"]).shape[0] == 1):
            return _closed_cap_ball(body, gauge, X)

    g_fn, gg_fn, ls_fn = _gauge_fns(gauge)
    sup_fn, warm_fn, curve = _body_fns(body)
    ztol = max(tol, 1e-15)
    if scale is None:
        scale = max(1.0, float(np.max(np.abs(X))) if m else 1.0)
    merge2 = (1e-12 * scale) ** 2
    if exit_levels is not None:
        exit_levels = np.asarray(exit_levels, dtype=float)
        exit_cells = np.asarray(exit_cells, dtype=bool)

    out = {"d": np.zeros(m), "P": X.copy(), "gap": np.zeros(m),
           "iters": np.zeros(m, dtype=np.int64), "conv": np.zeros(m, dtype=bool)}
    if m == 0:
        return out

    Y = warm_fn(X)
    if curve:
        _curve_loop(X, Y, g_fn, gg_fn, ls_fn, sup_fn, tol, ztol, maxiter, out,
                    exit_levels, exit_cells)
    else:
        _atoms_loop(X, Y, g_fn, gg_fn, ls_fn, sup_fn, tol, ztol, maxiter, merge2,
                    out, exit_levels, exit_cells)
    return out


def _cert_exit(val, gap, levels, cells):
    """Mask of points whose [val-gap, val] interval sits in a True cell."""
    lb = np.maximum(val - gap, 0.0)
    c1 = np.searchsorted(levels, lb, side="left")
    c2 = np.searchsorted(levels, val, side="left")
    return (c1 == c2) & cells[c2]


def _curve_loop(X, Y, g_fn, gg_fn, ls_fn, sup_fn, tol, ztol, maxiter, out,
                levels=None, cells=None):
    idx = np.arange(X.shape[0])
    it = 0
    while idx.size:
        x = X[idx]
        y = Y[idx]
        w = x - y
        val = g_fn(w)
        zm = val <= ztol
        if np.any(zm):
            ids = idx[zm]
            _finish(out, ids, 0.0, X[ids], 0.0, it, True)
            idx, x, y, w, val = idx[~zm], x[~zm], y[~zm], w[~zm], val[~zm]
            if idx.size == 0:
                break
        g = gg_fn(w)
        s = sup_fn(g)
        gap = np.einsum("ij,ij->i", g, s - y)
        done = gap <= tol
        if levels is not None:
            done |= _cert_exit(val, gap, levels, cells)
        if np.any(done):
            ids = idx[done]
            _finish(out, ids, val[done], y[done], gap[done], it, True)
            keep = ~done
            idx, x, y, w, s, val, gap = (idx[keep], x[keep], y[keep], w[keep],
                                         s[keep], val[keep], gap[keep])
            if idx.size == 0:
                break
        if it >= maxiter:
            _finish(out, idx, val, y, gap, it, False)
            break
        D = s - y
        gam = ls_fn(w, D, np.ones(idx.size))
        Y[idx] = y + gam[:, None] * D
        it += 1


def _atoms_loop(X, Y, g_fn, gg_fn, ls_fn, sup_fn, tol, ztol, maxiter, merge2, out,
                levels=None, cells=None):
    m, n = X.shape
    aP = np.zeros((m, CAP, n))
    aW = np.zeros((m, CAP))
    aP[:, 0, :] = Y
    aW[:, 0] = 1.0
    idx = np.arange(m)
    it = 0
    while idx.size:
        x = X[idx]
        y = Y[idx]
        w = x - y
        val = g_fn(w)
        zm = val <= ztol
        if np.any(zm):
            ids = idx[zm]
            _finish(out, ids, 0.0, X[ids], 0.0, it, True)
            keep = ~zm
            idx, x, y, w, val = idx[keep], x[keep], y[keep], w[keep], val[keep]
            if idx.size == 0:
                break
        g = gg_fn(w)
        s = sup_fn(g)
        gap = np.einsum("ij,ij->i", g, s - y)
        done = gap <= tol
        if levels is not None:
            done |= _cert_exit(val, gap, levels, cells)
        if np.any(done):
            ids = idx[done]
            _finish(out, ids, val[done], y[done], gap[done], it, True)
            keep = ~done
            idx, x, y, w, g, s, val, gap = (idx[keep], x[keep], y[keep], w[keep],
                                            g[keep], s[keep], val[keep], gap[keep])
            if idx.size == 0:
                break
        if it >= maxiter:
            _finish(out, idx, val, y, gap, it, False)
            break
        sub = idx  # global ids of the still-active rows
        aPa = aP[sub]
        aWa = aW[sub]
        r = np.arange(sub.size)
        adots = np.einsum("mcn,mn->mc", aPa, g)
        adots[aWa <= 0.0] = np.inf
        ai = np.argmin(adots, axis=1)
        A = aPa[r, ai]
        gmax = aWa[r, ai]
        D = s - A
        descent = np.einsum("ij,ij->i", g, D)
        fw = descent <= 1e-14 * np.abs(np.einsum("ij,ij->i", g, s))
        # pairwise step: mass gamma moves from the away atom to s;
        # frank-wolfe fallback (degenerate away direction): all weights
        # shrink by (1 - gamma) and s gains gamma.
        D = np.where(fw[:, None], s - y, D)
        gmax = np.where(fw, 1.0, gmax)
        gam = ls_fn(w, D, gmax)
        y_new = y + gam[:, None] * D
        Y[sub] = y_new
        pw = ~fw
        rows_pw = r[pw]
        aW[sub[pw], ai[pw]] = np.maximum(aWa[rows_pw, ai[pw]] - gam[pw], 0.0)
        if np.any(fw):
            aW[sub[fw]] *= (1.0 - gam[fw])[:, None]
        aW[sub] = np.where(aW[sub] < 1e-15, 0.0, aW[sub])
        # merge or insert the new atom s with weight gamma
        aWa = aW[sub]
        diff = aPa - s[:, None, :]
        d2 = np.einsum("mcn,mcn->mc", diff, diff)
        d2m = np.where(aWa > 0.0, d2, np.inf)
        mi = np.argmin(d2m, axis=1)
        matched = d2m[r, mi] <= merge2
        free = np.argmax(aWa <= 0.0, axis=1)
        has_free = aWa[r, free] <= 0.0
        ins = ~matched & has_free
        coll = ~matched & ~has_free
        if np.any(matched):
            aW[sub[matched], mi[matched]] += gam[matched]
        if np.any(ins):
            gi = sub[ins]
            aP[gi, free[ins]] = s[ins]
            aW[gi, free[ins]] = gam[ins]
        if np.any(coll):
            # no free slot: fold s into the nearest atom instead of
            # restarting; the blend stays feasible by convexity, and the
            # active set keeps its pairwise structure (continuous boundary
            # pieces emit a fresh support point every step, so for hull
            # bodies a restart would degrade this to plain frank-wolfe
            # and stall on the ball/apex seam)
            gi = sub[coll]
            j = mi[coll]
            wj = aW[gi, j]
            tot = wj + gam[coll]
            aP[gi, j] = (wj[:, None] * aP[gi, j] + gam[coll, None] * s[coll]) / tot[:, None]
            aW[gi, j] = tot
        it += 1
