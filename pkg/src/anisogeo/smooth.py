"""Relative curvature of smooth convex bodies against a smooth gauge.

The boundary of a C^2+ body K is parametrized through its normal
directions: X = grad h_K on a chart of the sphere. Renormalizing the unit
normal u to xi = u / h_E(u) and pairing the derivatives of xi with those of
X and of Y = grad h_E yields the tensors G and B; the generalized
eigenvalues of (G, B) are the relative principal radii, whose normalized
elementary symmetric functions s_k integrate (weighted by the surface
element of E) to the same area measures the shell estimator produces. This
module is the deterministic cross-check for that estimator.

Charts are cube faces: v(z) = (z_1, .., sign, .., z_{n-1}) is linear in z,
and since grad h is 0-homogeneous and hess h is (-1)-homogeneous, all
tensors can be evaluated at the unnormalized v directly; the identities
<xi, X_i> = 0 and <xi, Y> = 1 then hold exactly by Euler's relation.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh
from scipy.special import binom

from .bodies import ConvexBody
from .cells import BoundaryCellComplex, _spherical_triangle_area
from .errors import InvalidSpec, NotSmooth, TensorAsymmetry
from .gauges import GaugeBody
from .measures import AreaMeasureProfile, CellMeasure, default_cells


class Chart:
    """One cube face: z in (-1, 1)^{n-1} -> v(z) with v[axis] = sign."""

    def __init__(self, n: int, face: int):
        if not 0 <= face < 2 * n:
            raise InvalidSpec("face index out of range")
        self.n = n
        self.axis = face // 2
        self.sign = 1.0 if face % 2 == 0 else -1.0
        self.free = [i for i in range(n) if i != self.axis]

    def embed(self, Z) -> np.ndarray:
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        V = np.empty((Z.shape[0], self.n))
        V[:, self.axis] = self.sign
        V[:, self.free] = Z
        return V

    def u(self, Z) -> np.ndarray:
        V = self.embed(Z)
        return V / np.linalg.norm(V, axis=1, keepdims=True)

    def basis(self) -> np.ndarray:
        """Chart coordinate directions as vectors of R^n (constant in z)."""
        return np.eye(self.n)[self.free]


def charts(n: int) -> list[Chart]:
    return [Chart(n, f) for f in range(2 * n)]


def _hess_at(body, V: np.ndarray, fd_step: float | None) -> np.ndarray:
    """Batched Hessian of the support function, analytic or central FD."""
    try:
        H = np.asarray(body.hess_h(V), dtype=float)
        if H.ndim == 2:
            H = H[None]
        return H
    except (NotSmooth, AttributeError):
        if fd_step is None:
            raise
    h = fd_step
    m, n = V.shape
    H = np.empty((m, n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        gp = np.atleast_2d(body.grad_h(V + e))
        gm = np.atleast_2d(body.grad_h(V - e))
        H[:, :, j] = (gp - gm) / (2 * h)
    return 0.5 * (H + np.swapaxes(H, 1, 2))


@dataclass
class RelShape:
    """Relative shape data of bd K against E at one chart point."""

    G: np.ndarray
    B: np.ndarray
    radii: np.ndarray
    s: np.ndarray            # s_0..s_{n-1}, s_0 = 1
    h_ij: np.ndarray         # first fundamental form of bd E in chart basis
    xi: np.ndarray           # renormalized normal u / h_E(u)
    X: np.ndarray            # columns X_i = d/dz_i of the boundary point of K
    Y: np.ndarray            # columns Y_i, same for E
    meta: dict = field(default_factory=dict)


def relative_normalization(K: ConvexBody, E: GaugeBody, chart: Chart, z
                           ) -> tuple[np.ndarray, np.ndarray]:
    """(xi, Y) at the boundary point of K with normal direction u(z):
    xi = u / h_E(u) and Y is the boundary point of E with the same normal."""
    v = chart.embed(z)[0]
    he = float(np.atleast_1d(E.h(v))[0])
    xi = v / he
    Y = np.asarray(E.grad_h(v), dtype=float).reshape(-1)
    return xi, Y


def _sym_elem(radii: np.ndarray) -> np.ndarray:
    """Normalized elementary symmetric functions s_k = e_k / binom(n-1, k)."""
    coeffs = np.poly(radii)          # [1, -e_1, e_2, -e_3, ..]
    e = np.abs(coeffs)               # |e_k| guards sign conventions
    k = np.arange(len(radii) + 1)
    return e / binom(len(radii), k)


def rel_tensors(K: ConvexBody, E: GaugeBody, chart: Chart, z,
                fd_step: float | None = 1e-5) -> RelShape:
    """Tensors G, B, relative radii and s_k at one chart point.

    G_ij = <Xi_i, X_j> and B_ij = <Xi_i, Y_j> reduce, in the linear chart
    v(z), to the support-function Hessians of K and E over the chart
    coordinate plane, divided by h_E(v); their generalized eigenvalues are
    the relative principal radii.
    """
    v = chart.embed(z)[0]
    n = K.n
    HK = _hess_at(K, v[None], fd_step)[0]
    HE = _hess_at(E, v[None], None)[0]
    he = float(np.atleast_1d(E.h(v))[0])
    idx = chart.free
    G = HK[np.ix_(idx, idx)] / he
    B = HE[np.ix_(idx, idx)] / he
    asym = np.linalg.norm(B - B.T) / max(np.linalg.norm(B), 1e-300)
    if asym > 1e-4:
        raise TensorAsymmetry(f"relative asymmetry {asym:.2e}")
    B = 0.5 * (B + B.T)
    G = 0.5 * (G + G.T)
    wB = np.linalg.eigvalsh(B)
    wG = np.linalg.eigvalsh(G)
    if wB.min() < 1e-10 or wG.min() < 1e-10:
        raise NotSmooth(f"tangential Hessian near-degenerate "
                        f"(min eigs {wG.min():.2e}, {wB.min():.2e})")
    radii = eigh(G, B, eigvals_only=True)
    s = _sym_elem(radii)
    # boundary data in the ambient space
    X = HK @ chart.basis().T          # columns X_i
    Y = HE @ chart.basis().T
    xi = v / he
    h_ij = Y.T @ Y
    # consistency of X_i = G_ik B^{kr} Y_r
    W = G @ np.linalg.inv(B)
    resid = np.linalg.norm(X - Y @ W.T) / max(np.linalg.norm(X), 1e-300)
    return RelShape(G, B, np.sort(radii), s, h_ij, xi, X, Y,
                    {"rel_residual_31N": float(resid), "asym": float(asym)})


def jacobian_expansion_check(K: ConvexBody, E: GaugeBody, chart: Chart, z,
                             rho_list, fd_step: float | None = 1e-5) -> float:
    """Max relative residual between the direct (n-1)-Jacobian of
    X + rho Y and its binomial expansion in the s_k."""
    shape = rel_tensors(K, E, chart, z, fd_step)
    n = K.n
    worst = 0.0
    sqh = np.sqrt(max(np.linalg.det(shape.h_ij), 0.0))
    for rho in np.atleast_1d(rho_list):
        M = shape.X + rho * shape.Y
        direct = np.sqrt(max(np.linalg.det(M.T @ M), 0.0))
        series = sqh * sum(rho ** m * binom(n - 1, m) * shape.s[n - 1 - m]
                           for m in range(n))
        worst = max(worst, abs(direct - series) / max(abs(series), 1e-300))
    return worst


# ----------------------------------------------------------- integration
def _tangent_frame(U: np.ndarray) -> np.ndarray:
    """Deterministic orthonormal basis of u-perp, shape (m, n-1, n)."""
    m, n = U.shape
    if n == 2:
        T = np.empty((m, 1, 2))
        T[:, 0, 0] = -U[:, 1]
        T[:, 0, 1] = U[:, 0]
        return T
    pick = np.argmin(np.abs(U), axis=1)
    e = np.zeros((m, 3))
    e[np.arange(m), pick] = 1.0
    t1 = np.cross(e, U)
    t1 /= np.linalg.norm(t1, axis=1, keepdims=True)
    t2 = np.cross(U, t1)
    T = np.stack([t1, t2], axis=1)
    return T


def _tangential_forms(K: ConvexBody, E: GaugeBody, U: np.ndarray,
                      fd_step: float | None
                      ) -> tuple[np.ndarray, np.ndarray]:
    """Support Hessians of K and E restricted to orthonormal tangent
    frames at unit directions U, shapes (m, n-1, n-1)."""
    HK = _hess_at(K, U, fd_step)
    HE = _hess_at(E, U, None)
    T = _tangent_frame(U)
    Gt = np.einsum("mia,mab,mjb->mij", T, HK, T)
    Bt = np.einsum("mia,mab,mjb->mij", T, HE, T)
    return Gt, Bt


def _discriminants(Gt: np.ndarray, Bt: np.ndarray) -> np.ndarray:
    """Rows of mixed discriminants D(G..k.., B..n-1-k..), k = 0..n-1."""
    m, d, _ = Gt.shape
    out = np.empty((d + 1, m))
    if d == 1:
        out[0] = Bt[:, 0, 0]
        out[1] = Gt[:, 0, 0]
        return out
    out[0] = Bt[:, 0, 0] * Bt[:, 1, 1] - Bt[:, 0, 1] ** 2
    out[2] = Gt[:, 0, 0] * Gt[:, 1, 1] - Gt[:, 0, 1] ** 2
    out[1] = 0.5 * (Gt[:, 0, 0] * Bt[:, 1, 1] + Gt[:, 1, 1] * Bt[:, 0, 0]
                    - 2 * Gt[:, 0, 1] * Bt[:, 0, 1])
    return out


def sk_densities(K: ConvexBody, E: GaugeBody, U: np.ndarray,
                 fd_step: float | None = 1e-5) -> np.ndarray:
    """Spherical densities of S_0..S_{n-1} at unit directions U.

    Row k holds s_k(u) * D_E(u) where D_E is the surface-element density of
    bd E over the sphere; equivalently the mixed discriminant of k copies
    of the tangential Hessian of h_K and n-1-k copies of that of h_E.
    """
    U = np.atleast_2d(np.asarray(U, dtype=float))
    return _discriminants(*_tangential_forms(K, E, U, fd_step))


def sk_values(K: ConvexBody, E: GaugeBody, U: np.ndarray,
              fd_step: float | None = 1e-5) -> np.ndarray:
    """Relative curvature functions s_k(u) alone: the density rows divided
    by D_E(u). Bounded even where bd E has flat points (D_E singular)."""
    U = np.atleast_2d(np.asarray(U, dtype=float))
    dens = sk_densities(K, E, U, fd_step)
    return dens / dens[0]


def _integrate_circle(dens, cells: BoundaryCellComplex, rtol: float,
                      max_depth: int) -> tuple[np.ndarray, np.ndarray]:
    """Adaptive midpoint integration over each arc cell (open rule: the
    nodes avoid arc endpoints and centers, where gauges like the l^p ball
    have integrable curvature singularities)."""
    m = cells.m
    width = cells.meta["width"]
    off = cells.meta["offset"]
    nk = cells.n
    masses = np.zeros((nk, m))
    errs = np.zeros((nk, m))
    a0 = off + np.arange(m) * width
    segs_a = a0
    segs_len = np.full(m, width)
    segs_cell = np.arange(m)
    th = segs_a + segs_len / 2
    segs_f = dens(np.stack([np.cos(th), np.sin(th)], axis=1))  # (nk, t)
    segs_tol = np.full(m, np.inf)  # first pass: always split once
    depth = 0
    while segs_a.size:
        mid = segs_a + segs_len / 2
        la, ll = segs_a, segs_len / 2
        ca = np.concatenate([la, mid])
        cl = np.concatenate([ll, ll])
        ccell = np.concatenate([segs_cell, segs_cell])
        t2 = ca + cl / 2
        cf = dens(np.stack([np.cos(t2), np.sin(t2)], axis=1))
        I1 = segs_f * segs_len
        half = cf * cl
        I2 = half[:, :segs_a.size] + half[:, segs_a.size:]
        err = np.max(np.abs(I2 - I1), axis=0)
        rt = np.maximum(np.max(np.abs(I2), axis=0), 1e-12) * rtol
        tol_eff = np.where(np.isinf(segs_tol), rt, segs_tol)
        done = (err <= tol_eff) & (depth > 0) | (depth >= max_depth)
        np.add.at(masses.T, segs_cell[done], I2[:, done].T)
        np.add.at(errs.T, segs_cell[done], np.abs(I2 - I1)[:, done].T)
        keep = ~done
        kk = np.concatenate([keep, keep])
        segs_a, segs_len, segs_cell = ca[kk], cl[kk], ccell[kk]
        segs_f = cf[:, kk]
        child_tol = (tol_eff / 2)[keep]
        segs_tol = np.concatenate([child_tol, child_tol])
        depth += 1
    return masses, errs


def _integrate_octa(dens, cells: BoundaryCellComplex, rtol: float,
                    max_depth: int, max_active: int = 400_000
                    ) -> tuple[np.ndarray, np.ndarray]:
    """Adaptive centroid-rule integration over spherical triangle cells.

    Each triangle is compared against its 4 geodesic children; children
    inherit half the tolerance. If the active set outgrows max_active
    (possible when the integrand is singular along curves), the easiest
    triangles are retired first and their error estimates accumulate
    into the per-cell error output."""
    corners = cells.meta["corners"]
    nk = cells.n
    m = cells.m
    masses = np.zeros((nk, m))
    errs = np.zeros((nk, m))
    A = corners[:, 0].copy()
    B = corners[:, 1].copy()
    C = corners[:, 2].copy()
    cell = np.arange(m)
    cent = A + B + C
    cent /= np.linalg.norm(cent, axis=1, keepdims=True)
    f = dens(cent)
    tol = np.full(m, np.inf)
    depth = 0
    while A.shape[0]:
        t = A.shape[0]
        Mab = A + B
        Mab /= np.linalg.norm(Mab, axis=1, keepdims=True)
        Mbc = B + C
        Mbc /= np.linalg.norm(Mbc, axis=1, keepdims=True)
        Mca = C + A
        Mca /= np.linalg.norm(Mca, axis=1, keepdims=True)
        cA = np.concatenate([A, Mab, Mca, Mab], axis=0)
        cB = np.concatenate([Mab, B, Mbc, Mbc], axis=0)
        cC = np.concatenate([Mca, Mbc, C, Mca], axis=0)
        ccell = np.tile(cell, 4)
        ar = _spherical_triangle_area(cA, cB, cC)
        cc = cA + cB + cC
        cc /= np.linalg.norm(cc, axis=1, keepdims=True)
        cf = dens(cc)
        area1 = _spherical_triangle_area(A, B, C)
        I1 = f * area1
        Ic = cf * ar
        I2 = Ic[:, :t] + Ic[:, t:2 * t] + Ic[:, 2 * t:3 * t] + Ic[:, 3 * t:]
        diff = np.max(np.abs(I2 - I1), axis=0)
        rt = np.maximum(np.max(np.abs(I2), axis=0), 1e-12) * rtol
        tol_eff = np.where(np.isinf(tol), rt, tol)
        done = (diff <= tol_eff) & (depth > 0) | (depth >= max_depth)
        over = 4 * int(np.count_nonzero(~done)) - max_active
        if over > 0:
            # retire the smallest-error triangles to bound memory
            ratio = np.where(done, np.inf, diff / tol_eff)
            done = done | (ratio <= np.partition(ratio, (over - 1) // 4
                                                 )[(over - 1) // 4])
        np.add.at(masses.T, cell[done], I2[:, done].T)
        np.add.at(errs.T, cell[done], np.abs(I2 - I1)[:, done].T)
        keep = ~done
        kk = np.tile(keep, 4)
        A, B, C, cell = cA[kk], cB[kk], cC[kk], ccell[kk]
        f = cf[:, kk]
        child_tol = (tol_eff / 2)[keep]
        tol = np.tile(child_tol, 4)
        depth += 1
    return masses, errs


def _integrate_circle_mesh(K, E, cells: BoundaryCellComplex, splits: int,
                           fd_step) -> tuple[np.ndarray, np.ndarray]:
    """Polyline integration on bd E: each arc cell is cut into 2**splits
    subarcs, corners map through the inverse normal map of E, and s_k at
    the arc midpoints weight the flat segment lengths. Errors are
    Richardson estimates from one level down."""
    def run(s):
        m = cells.m
        width = cells.meta["width"]
        off = cells.meta["offset"]
        r = 1 << s
        th = off + np.arange(m * r + 1) * (width / r)
        mid = th[:-1] + width / (2 * r)
        U = np.stack([np.cos(th), np.sin(th)], axis=1)
        Y = np.atleast_2d(E.grad_h(U))
        seg = np.linalg.norm(np.diff(Y, axis=0), axis=1)
        sk = sk_values(K, E, np.stack([np.cos(mid), np.sin(mid)], axis=1),
                       fd_step)
        contrib = sk * seg
        return contrib.reshape(cells.n, m, r).sum(axis=2)

    fine = run(splits)
    coarse = run(splits - 1)
    return fine, np.abs(fine - coarse)


def _refine_corners(A, B, C, levels: int):
    """Uniform geodesic 4-way refinement, preserving triangle count x4."""
    for _ in range(levels):
        Mab = A + B
        Mab /= np.linalg.norm(Mab, axis=1, keepdims=True)
        Mbc = B + C
        Mbc /= np.linalg.norm(Mbc, axis=1, keepdims=True)
        Mca = C + A
        Mca /= np.linalg.norm(Mca, axis=1, keepdims=True)
        A = np.concatenate([A, Mab, Mca, Mab], axis=0)
        B = np.concatenate([Mab, B, Mbc, Mbc], axis=0)
        C = np.concatenate([Mca, Mbc, C, Mca], axis=0)
    return A, B, C


def _integrate_octa_mesh(K, E, cells: BoundaryCellComplex, splits: int,
                         fd_step, group: int = 32
                         ) -> tuple[np.ndarray, np.ndarray]:
    """Flat-triangle mesh of bd E over the cell triangulation.

    Cell corners refine geodesically and map through the inverse normal
    map Y = grad h_E; the flat areas of the mapped triangles carry the
    surface measure of bd E, so gauges with flat spots (singular density
    on the sphere) integrate with no singularity at all. s_k values sit
    at the spherical centroids. The error output is a Richardson estimate
    from one level down."""
    corners = cells.meta["corners"]
    nk = cells.n
    masses = np.zeros((nk, cells.m))
    coarse = np.zeros((nk, cells.m))
    for lo in range(0, cells.m, group):
        hi = min(lo + group, cells.m)
        A0 = corners[lo:hi, 0]
        B0 = corners[lo:hi, 1]
        C0 = corners[lo:hi, 2]
        for s, out in ((splits - 1, coarse), (splits, masses)):
            A, B, C = _refine_corners(A0, B0, C0, s)
            YA = np.atleast_2d(E.grad_h(A))
            YB = np.atleast_2d(E.grad_h(B))
            YC = np.atleast_2d(E.grad_h(C))
            area = 0.5 * np.linalg.norm(np.cross(YB - YA, YC - YA), axis=1)
            # normal direction at the facet centroid (grad of the gauge is
            # 0-homogeneous, so the interior centroid evaluates on the ray)
            cent = np.atleast_2d(E.grad_gauge(YA + YB + YC))
            cent /= np.linalg.norm(cent, axis=1, keepdims=True)
            sk = sk_values(K, E, cent, fd_step)
            contrib = (sk * area).reshape(nk, 4 ** s, hi - lo)
            out[:, lo:hi] += contrib.sum(axis=1)
    # the facet rows along flat-spot circles converge at first order;
    # two-level extrapolation removes that term
    ext = np.maximum(2.0 * masses - coarse, 0.0)
    return ext, np.abs(masses - coarse)


def integrate_area_measures_smooth(K: ConvexBody, E: GaugeBody,
                                   cells: BoundaryCellComplex | None = None,
                                   quad_density: int = 64,
                                   rtol: float = 1e-6,
                                   fd_step: float | None = None,
                                   max_depth: int = 60,
                                   method: str = "auto"
                                   ) -> AreaMeasureProfile:
    """Deterministic per-cell integration of the s_k densities.

    Produces an AreaMeasureProfile directly comparable with the shell
    estimator output on the same cell complex; stderr holds the local
    quadrature error estimates. quad_density tightens rtol and the mesh
    resolution as the reference 64 is tightened or loosened.

    method "adaptive" integrates s_k * D_E on the sphere with adaptive
    subdivision; "mesh" meshes bd E through the inverse normal map, which
    stays regular when bd E has flat spots (l^p gauges with p > 2 have
    their curvature singularity exactly on the coordinate circles, where
    isotropic subdivision cannot converge). "auto" picks per gauge.
    """
    n = K.n
    if cells is None:
        cells = default_cells(n)
    if method == "auto":
        method = "mesh" if getattr(E, "p", 2.0) > 2.0 else "adaptive"
    if method not in ("adaptive", "mesh"):
        raise InvalidSpec("method must be auto, adaptive or mesh")
    extra = max(int(np.round(np.log2(max(quad_density, 1) / 64.0))), -3)
    if method == "adaptive":
        rtol = rtol * (64.0 / max(quad_density, 1)) ** 2
        dens = lambda U: sk_densities(K, E, U, fd_step)  # noqa: E731
        if cells.kind == "circle":
            masses, errs = _integrate_circle(dens, cells, rtol, max_depth)
        else:
            masses, errs = _integrate_octa(dens, cells, rtol, max_depth)
    elif cells.kind == "circle":
        masses, errs = _integrate_circle_mesh(K, E, cells, 10 + extra,
                                              fd_step)
    else:
        masses, errs = _integrate_octa_mesh(K, E, cells, 6 + extra, fd_step)
    measures = {k: CellMeasure(masses[k], errs[k], float(masses[k].sum()),
                               masses[k].copy(),
                               np.zeros(cells.m, dtype=bool))
                for k in range(n)}
    cov = np.zeros((n, n, cells.m))
    meta = {"method": method, "rtol": rtol, "max_depth": max_depth,
            "quad_density": quad_density}
    return AreaMeasureProfile(n, cells, measures, cov, meta)
