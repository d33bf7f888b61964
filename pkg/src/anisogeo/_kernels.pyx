# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False, language_level=3
"""Compiled per-point gauge-distance kernel.

Mirrors the semantics of _kernels_py.edist_batch for descriptor-supported
bodies (polytope / ball / ellipsoid / hull of ball and points) and gauges
(ball / ellipsoid / lp). One tight C loop per query point: pairwise
Frank-Wolfe with exact or safeguarded-Newton line search, duality-gap stop.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, fabs, pow, sqrt

cnp.import_array()

DEF MAXN = 8
DEF CAP = 32

# gauge kinds
DEF G_BALL = 0
DEF G_ELL = 1
DEF G_LP = 2
# body kinds
DEF B_POLY = 0
DEF B_BALL = 1
DEF B_ELL = 2
DEF B_HULL = 3


# ---------------------------------------------------------------------- gauge

cdef inline double _gval(int gk, double gr, double gp,
                         double[:, ::1] M, double[::1] ia,
                         double* w, int n) noexcept nogil:
    cdef int i, j
    cdef double s = 0.0, t, acc
    if gk == G_BALL:
        for i in range(n):
            s += w[i] * w[i]
        return sqrt(s) / gr
    if gk == G_ELL:
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += M[i, j] * w[j]
            s += acc * w[i]
        return sqrt(s)
    # lp
    if gp == 4.0:
        for i in range(n):
            t = w[i] * ia[i]
            t = t * t
            s += t * t
        return sqrt(sqrt(s))
    for i in range(n):
        s += pow(fabs(w[i] * ia[i]), gp)
    return pow(s, 1.0 / gp)


cdef inline void _ggrad(int gk, double gr, double gp,
                        double[:, ::1] M, double[::1] ia,
                        double* w, double* g, int n) noexcept nogil:
    cdef int i, j
    cdef double s = 0.0, t, c, coef
    if gk == G_BALL:
        for i in range(n):
            s += w[i] * w[i]
        s = sqrt(s) * gr
        for i in range(n):
            g[i] = w[i] / s
        return
    if gk == G_ELL:
        s = 0.0
        for i in range(n):
            c = 0.0
            for j in range(n):
                c += M[i, j] * w[j]
            g[i] = c
            s += c * w[i]
        s = sqrt(s)
        for i in range(n):
            g[i] /= s
        return
    if gp == 4.0:
        s = 0.0
        for i in range(n):
            c = w[i] * ia[i]
            t = c * c
            s += t * t
            g[i] = t * c * ia[i]       # (w ia)^3 * ia, sign preserved
        coef = pow(s, -0.75)
        for i in range(n):
            g[i] *= coef
        return
    s = 0.0
    for i in range(n):
        s += pow(fabs(w[i] * ia[i]), gp)
    coef = pow(s, 1.0 / gp - 1.0)
    for i in range(n):
        c = w[i] * ia[i]
        t = pow(fabs(c), gp - 1.0)
        g[i] = (t if c >= 0 else -t) * ia[i] * coef


cdef inline double _linesearch(int gk, double gr, double gp,
                               double[:, ::1] M, double[::1] ia,
                               double* w, double* D, double gmax,
                               int n) noexcept nogil:
    """gamma in [0, gmax] minimizing g(w - gamma D)."""
    cdef int i, k
    cdef double num = 0.0, den = 0.0, acc
    cdef double s1, s2, s3, s4, wh, dh
    cdef double lo, hi, x, qx, dq, nx, t
    if gk == G_BALL:
        for i in range(n):
            num += w[i] * D[i]
            den += D[i] * D[i]
        if den <= 0.0:
            return 0.0
        x = num / den
    elif gk == G_ELL:
        for i in range(n):
            acc = 0.0
            for k in range(n):
                acc += M[i, k] * D[k]
            num += acc * w[i]
            den += acc * D[i]
        if den <= 0.0:
            return 0.0
        x = num / den
    elif gp == 4.0:
        # phi'(gamma) ~ -q(gamma), q = S1 - 3 S2 g + 3 S3 g^2 - S4 g^3
        s1 = s2 = s3 = s4 = 0.0
        for i in range(n):
            wh = w[i] * ia[i]
            dh = D[i] * ia[i]
            s1 += dh * wh * wh * wh
            s2 += dh * dh * wh * wh
            s3 += dh * dh * dh * wh
            s4 += dh * dh * dh * dh
        # q decreasing; q(0) = s1 > 0 for descent directions
        x = gmax
        qx = s1 - 3.0 * s2 * x + 3.0 * s3 * x * x - s4 * x * x * x
        if qx >= 0.0:
            return gmax
        lo = 0.0
        hi = gmax
        x = 0.5 * gmax
        for k in range(80):
            qx = s1 - 3.0 * s2 * x + 3.0 * s3 * x * x - s4 * x * x * x
            if qx > 0.0:
                lo = x
            else:
                hi = x
            dq = -3.0 * s2 + 6.0 * s3 * x - 3.0 * s4 * x * x
            if dq != 0.0:
                nx = x - qx / dq
            else:
                nx = 0.5 * (lo + hi)
            if nx <= lo or nx >= hi:
                nx = 0.5 * (lo + hi)
            if hi - lo < 1e-16 * gmax + 1e-300:
                break
            x = nx
        return 0.5 * (lo + hi)
    else:
        # general lp: bisection on the directional derivative
        lo = 0.0
        hi = gmax
        acc = 0.0
        for i in range(n):
            t = (w[i] - hi * D[i]) * ia[i]
            num = pow(fabs(t), gp - 1.0)
            acc += D[i] * ia[i] * (num if t >= 0 else -num)
        if acc >= 0.0:
            return gmax
        for k in range(64):
            x = 0.5 * (lo + hi)
            acc = 0.0
            for i in range(n):
                t = (w[i] - x * D[i]) * ia[i]
                num = pow(fabs(t), gp - 1.0)
                acc += D[i] * ia[i] * (num if t >= 0 else -num)
            if acc > 0.0:
                lo = x
            else:
                hi = x
        return 0.5 * (lo + hi)
    if x < 0.0:
        x = 0.0
    if x > gmax:
        x = gmax
    return x


# ----------------------------------------------------------------------- body

cdef inline void _support(int bk, double[:, ::1] V, int nv,
                          double[::1] c, double R, double[:, ::1] A,
                          double* g, double* s, int n) noexcept nogil:
    cdef int i, j, best
    cdef double bv, dv, nrm, hb, acc
    cdef double tmp[MAXN]
    if bk == B_POLY:
        best = 0
        bv = -INFINITY
        for i in range(nv):
            dv = 0.0
            for j in range(n):
                dv += V[i, j] * g[j]
            if dv > bv:
                bv = dv
                best = i
        for j in range(n):
            s[j] = V[best, j]
        return
    if bk == B_BALL:
        nrm = 0.0
        for j in range(n):
            nrm += g[j] * g[j]
        nrm = sqrt(nrm)
        if nrm <= 0.0:
            nrm = 1.0
        for j in range(n):
            s[j] = c[j] + R * g[j] / nrm
        return
    if bk == B_ELL:
        nrm = 0.0
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += A[i, j] * g[j]
            tmp[i] = acc
            nrm += acc * g[i]
        nrm = sqrt(nrm)
        for j in range(n):
            s[j] = c[j] + tmp[j] / nrm
        return
    # hull of ball and points: ties go to the ball
    nrm = 0.0
    hb = 0.0
    for j in range(n):
        nrm += g[j] * g[j]
        hb += c[j] * g[j]
    nrm = sqrt(nrm)
    hb += R * nrm
    best = -1
    bv = -INFINITY
    for i in range(nv):
        dv = 0.0
        for j in range(n):
            dv += V[i, j] * g[j]
        if dv > bv:
            bv = dv
            best = i
    if hb >= bv:
        if nrm <= 0.0:
            nrm = 1.0
        for j in range(n):
            s[j] = c[j] + R * g[j] / nrm
    else:
        for j in range(n):
            s[j] = V[best, j]


cdef inline void _warm(int bk, double[:, ::1] V, int nv,
                       double[::1] c, double R, double[:, ::1] A,
                       double* x, double* y, int n) noexcept nogil:
    cdef int i, j, best
    cdef double bv, dv, vv
    cdef double w[MAXN]
    if bk == B_POLY:
        best = 0
        bv = INFINITY
        for i in range(nv):
            vv = 0.0
            dv = 0.0
            for j in range(n):
                vv += V[i, j] * V[i, j]
                dv += V[i, j] * x[j]
            vv -= 2.0 * dv
            if vv < bv:
                bv = vv
                best = i
        for j in range(n):
            y[j] = V[best, j]
        return
    dv = 0.0
    for j in range(n):
        w[j] = x[j] - c[j]
        dv += w[j] * w[j]
    if dv == 0.0:
        w[0] = 1.0
        for j in range(1, n):
            w[j] = 0.0
    _support(bk, V, nv, c, R, A, w, y, n)


# ------------------------------------------------------------------ cap body

cdef inline double _cap2d(double xi, double eta, double R, double L,
                          double* qxi, double* qeta) noexcept nogil:
    cdef double ct = R / L
    cdef double st = sqrt(1.0 - ct * ct)
    cdef double rr = sqrt(xi * xi + eta * eta)
    cdef double elen = sqrt(L * L - R * R)
    cdef double ex = (L - R * ct) / elen
    cdef double ey = (0.0 - R * st) / elen
    cdef double proj, gline, d
    if eta * ct >= xi * st:
        d = rr - R
        if d < 0.0:
            d = 0.0
        if rr > 0.0:
            qxi[0] = R * xi / rr
            qeta[0] = R * eta / rr
        else:
            qxi[0] = -R
            qeta[0] = 0.0
        return d
    gline = xi * ct + eta * st - R
    proj = (xi - R * ct) * ex + (eta - R * st) * ey
    if proj < 0.0:
        proj = 0.0
    if proj > elen:
        proj = elen
    qxi[0] = R * ct + proj * ex
    qeta[0] = R * st + proj * ey
    if gline <= 0.0:
        return 0.0
    d = sqrt((xi - qxi[0]) * (xi - qxi[0]) + (eta - qeta[0]) * (eta - qeta[0]))
    return d


# ----------------------------------------------------------------- main entry

def edist_batch(dict body, dict gauge, double[:, ::1] X,
                double tol=1e-9, int maxiter=10000, double scale=1.0,
                exit_levels=None, exit_cells=None):
    """Compiled batched gauge distance; see _kernels_py.edist_batch."""
    cdef Py_ssize_t m = X.shape[0]
    cdef int n = <int> X.shape[1]
    if n > MAXN:
        raise ValueError("compiled kernel supports n <= 8")

    cdef int nlev = 0
    cdef double[::1] lev
    cdef unsigned char[::1] lev_ok
    if exit_levels is not None:
        lev = np.ascontiguousarray(exit_levels, dtype=np.float64)
        lev_ok = np.ascontiguousarray(np.asarray(exit_cells, dtype=bool).view(np.uint8))
        nlev = <int> lev.shape[0]
        if lev_ok.shape[0] != nlev + 1:
            raise ValueError("exit_cells must have len(exit_levels) + 1 entries")
    else:
        lev = np.zeros(1)
        lev_ok = np.zeros(2, dtype=np.uint8)

    cdef int bk, gk
    cdef double gr = 1.0, gp = 2.0, R = 0.0
    cdef double[:, ::1] M
    cdef double[::1] ia
    cdef double[:, ::1] V
    cdef double[::1] c
    cdef double[:, ::1] A
    cdef int nv = 0

    kind = gauge["kind"]
    dummy2 = np.zeros((1, 1))
    dummy1 = np.zeros(1)
    if kind == "ball":
        gk = G_BALL
        gr = float(gauge["radius"])
        M = dummy2
        ia = dummy1
    elif kind == "ellipsoid":
        gk = G_ELL
        M = np.ascontiguousarray(gauge["Ainv"], dtype=np.float64)
        ia = dummy1
    elif kind == "lp":
        gk = G_LP
        gp = float(gauge["p"])
        ia = np.ascontiguousarray(gauge["inv_scales"], dtype=np.float64)
        M = dummy2
    else:
        raise ValueError(f"unsupported gauge kind {kind!r}")

    kind = body["kind"]
    if kind == "polytope":
        bk = B_POLY
        V = np.ascontiguousarray(body["vertices"], dtype=np.float64)
        nv = <int> V.shape[0]
        c = dummy1
        A = dummy2
    elif kind == "ball":
        bk = B_BALL
        c = np.ascontiguousarray(body["center"], dtype=np.float64)
        R = float(body["radius"])
        V = dummy2
        A = dummy2
    elif kind == "ellipsoid":
        bk = B_ELL
        A = np.ascontiguousarray(body["A"], dtype=np.float64)
        cc = body.get("center")
        c = np.zeros(n) if cc is None else np.ascontiguousarray(cc, dtype=np.float64)
        V = dummy2
    elif kind == "hull_ball_pts":
        bk = B_HULL
        c = np.ascontiguousarray(body["center"], dtype=np.float64)
        R = float(body["radius"])
        V = np.ascontiguousarray(np.atleast_2d(body["points"]), dtype=np.float64)
        nv = <int> V.shape[0]
        A = dummy2
    else:
        raise ValueError(f"unsupported body kind {kind!r}")

    d_arr = np.zeros(m)
    P_arr = np.array(X, copy=True)
    gap_arr = np.zeros(m)
    it_arr = np.zeros(m, dtype=np.int64)
    conv_arr = np.zeros(m, dtype=np.uint8)
    cdef double[::1] d_v = d_arr
    cdef double[:, ::1] P_v = P_arr
    cdef double[::1] gap_v = gap_arr
    cdef long long[::1] it_v = it_arr
    cdef unsigned char[::1] conv_v = conv_arr

    cdef double ztol = tol if tol > 1e-15 else 1e-15
    cdef double merge2 = (1e-12 * scale) * (1e-12 * scale)
    cdef bint curve = (bk == B_BALL or bk == B_ELL)
    cdef bint cap_fast = (bk == B_HULL and gk == G_BALL and nv == 1)
    cdef bint ball_fast = (bk == B_BALL and gk == G_BALL)

    cdef Py_ssize_t pt
    cdef int i, j, it, ai, mi, free_slot, cert
    cdef double w[MAXN]
    cdef double g[MAXN]
    cdef double s[MAXN]
    cdef double y[MAXN]
    cdef double D[MAXN]
    cdef double aP[CAP * MAXN]
    cdef double aW[CAP]
    cdef double val, gap, gmax, gam, best, dv, descent, hs, d2, axis_len
    cdef double e_ax[MAXN]
    cdef double qxi, qeta, xi, eta
    cdef bint fw_step

    if ball_fast or cap_fast:
        if cap_fast:
            axis_len = 0.0
            for j in range(n):
                e_ax[j] = V[0, j] - c[j]
                axis_len += e_ax[j] * e_ax[j]
            axis_len = sqrt(axis_len)
            for j in range(n):
                e_ax[j] /= axis_len
        with nogil:
            for pt in range(m):
                if ball_fast:
                    val = 0.0
                    for j in range(n):
                        w[j] = X[pt, j] - c[j]
                        val += w[j] * w[j]
                    val = sqrt(val)
                    if val <= R:
                        d_v[pt] = 0.0
                    else:
                        d_v[pt] = (val - R) / gr
                        for j in range(n):
                            P_v[pt, j] = c[j] + R * w[j] / val
                else:
                    xi = 0.0
                    for j in range(n):
                        w[j] = X[pt, j] - c[j]
                        xi += w[j] * e_ax[j]
                    eta = 0.0
                    for j in range(n):
                        g[j] = w[j] - xi * e_ax[j]
                        eta += g[j] * g[j]
                    eta = sqrt(eta)
                    val = _cap2d(xi, eta, R, axis_len, &qxi, &qeta)
                    d_v[pt] = val / gr
                    if val > 0.0:
                        if eta > 0.0:
                            for j in range(n):
                                P_v[pt, j] = c[j] + qxi * e_ax[j] + qeta * g[j] / eta
                        else:
                            for j in range(n):
                                P_v[pt, j] = c[j] + qxi * e_ax[j]
                conv_v[pt] = 1
        return {"d": d_arr, "P": P_arr, "gap": gap_arr,
                "iters": it_arr, "conv": conv_arr.astype(bool)}

    with nogil:
        for pt in range(m):
            _warm(bk, V, nv, c, R, A, &X[pt, 0], y, n)
            if not curve:
                for j in range(n):
                    aP[j] = y[j]
                aW[0] = 1.0
                for i in range(1, CAP):
                    aW[i] = 0.0
            it = 0
            while True:
                val = 0.0
                for j in range(n):
                    w[j] = X[pt, j] - y[j]
                val = _gval(gk, gr, gp, M, ia, w, n)
                if val <= ztol:
                    d_v[pt] = 0.0
                    for j in range(n):
                        P_v[pt, j] = X[pt, j]
                    gap_v[pt] = 0.0
                    it_v[pt] = it
                    conv_v[pt] = 1
                    break
                _ggrad(gk, gr, gp, M, ia, w, g, n)
                _support(bk, V, nv, c, R, A, g, s, n)
                gap = 0.0
                for j in range(n):
                    gap += g[j] * (s[j] - y[j])
                cert = 0
                if nlev > 0 and gap > tol:
                    dv = val - gap
                    if dv < 0.0:
                        dv = 0.0
                    i = 0
                    while i < nlev and lev[i] < val:
                        i += 1
                    if lev_ok[i] != 0 and (i == 0 or lev[i - 1] < dv):
                        cert = 1
                if gap <= tol or cert == 1 or it >= maxiter:
                    d_v[pt] = val
                    for j in range(n):
                        P_v[pt, j] = y[j]
                    gap_v[pt] = gap
                    it_v[pt] = it
                    conv_v[pt] = 1 if (gap <= tol or cert == 1) else 0
                    break
                if curve:
                    for j in range(n):
                        D[j] = s[j] - y[j]
                    gam = _linesearch(gk, gr, gp, M, ia, w, D, 1.0, n)
                    for j in range(n):
                        y[j] += gam * D[j]
                else:
                    # away atom among alive slots
                    ai = -1
                    best = INFINITY
                    for i in range(CAP):
                        if aW[i] > 0.0:
                            dv = 0.0
                            for j in range(n):
                                dv += aP[i * MAXN + j] * g[j]
                            if dv < best:
                                best = dv
                                ai = i
                    descent = 0.0
                    hs = 0.0
                    for j in range(n):
                        descent += g[j] * (s[j] - aP[ai * MAXN + j])
                        hs += g[j] * s[j]
                    fw_step = descent <= 1e-14 * fabs(hs)
                    if fw_step:
                        gmax = 1.0
                        for j in range(n):
                            D[j] = s[j] - y[j]
                    else:
                        gmax = aW[ai]
                        for j in range(n):
                            D[j] = s[j] - aP[ai * MAXN + j]
                    gam = _linesearch(gk, gr, gp, M, ia, w, D, gmax, n)
                    for j in range(n):
                        y[j] += gam * D[j]
                    if fw_step:
                        for i in range(CAP):
                            aW[i] *= (1.0 - gam)
                    else:
                        aW[ai] -= gam
                        if aW[ai] < 0.0:
                            aW[ai] = 0.0
                    for i in range(CAP):
                        if aW[i] < 1e-15:
                            aW[i] = 0.0
                    # merge or insert s with weight gam
                    mi = -1
                    best = INFINITY
                    free_slot = -1
                    for i in range(CAP):
                        if aW[i] > 0.0:
                            d2 = 0.0
                            for j in range(n):
                                dv = aP[i * MAXN + j] - s[j]
                                d2 += dv * dv
                            if d2 < best:
                                best = d2
                                mi = i
                        elif free_slot < 0:
                            free_slot = i
                    if mi >= 0 and best <= merge2:
                        aW[mi] += gam
                    elif free_slot >= 0:
                        for j in range(n):
                            aP[free_slot * MAXN + j] = s[j]
                        aW[free_slot] = gam
                    else:
                        # no free slot: fold s into the nearest atom (the
                        # blend stays feasible by convexity); restarting
                        # here would degrade to plain frank-wolfe and
                        # stall on hull-body seams
                        dv = aW[mi] + gam
                        for j in range(n):
                            aP[mi * MAXN + j] = (aW[mi] * aP[mi * MAXN + j]
                                                 + gam * s[j]) / dv
                        aW[mi] = dv
                it += 1

    return {"d": d_arr, "P": P_arr, "gap": gap_arr,
            "iters": it_arr, "conv": conv_arr.astype(bool)}
