"""Closed-form and brute-force reference values for tests.

Everything here is deliberately independent of the solver and estimator
code paths: polygon geometry is done directly on vertex lists, distances
by dense enumeration, volumes by classical formulas.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull

from .cells import BoundaryCellComplex
from .errors import DegenerateEdge, InvalidSpec


@dataclass(frozen=True)
class OracleReport:
    quantity: str
    value: object
    method: str  # closed-form | grid-brute-force | triangulation


# --------------------------------------------------------------- polygons
def _ccw_vertices(vertices) -> np.ndarray:
    V = np.asarray(vertices, dtype=float)
    if V.ndim != 2 or V.shape[1] != 2:
        raise InvalidSpec("polygon oracle needs 2-d vertices")
    hull = ConvexHull(V)
    return V[hull.vertices]  # counterclockwise order


def polygon_edge_data(vertices):
    """(outward unit normals, edge lengths, ccw vertex array)."""
    V = _ccw_vertices(vertices)
    edges = np.roll(V, -1, axis=0) - V
    lengths = np.linalg.norm(edges, axis=1)
    if np.any(lengths < 1e-12):
        raise DegenerateEdge("edge shorter than 1e-12")
    # ccw orientation: outward normal is the edge direction rotated by -90
    normals = np.stack([edges[:, 1], -edges[:, 0]], axis=1) / lengths[:, None]
    return normals, lengths, V


def polygon_area(vertices) -> float:
    V = _ccw_vertices(vertices)
    x, y = V[:, 0], V[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def polygon_perimeter(vertices) -> float:
    _, lengths, _ = polygon_edge_data(vertices)
    return float(lengths.sum())


def polygon_area_measure(vertices, cells: BoundaryCellComplex):
    """Surface-area measure of a polygon binned into circle cells: atoms of
    edge length at the outward edge normals. Returns (masses, total)."""
    normals, lengths, _ = polygon_edge_data(vertices)
    idx = cells.locate(normals)
    masses = np.bincount(idx, weights=lengths, minlength=cells.m)
    return masses, float(lengths.sum())


def _arc_overlap_masses(starts, ends, cells: BoundaryCellComplex):
    """Distribute arc-length measure of arcs [start, end] (end > start,
    length < 2pi) over the cells of a circle complex. Exact."""
    width = cells.meta["width"]
    off = cells.meta["offset"]
    m = cells.m
    masses = np.zeros(m)
    for a, b in zip(starts, ends):
        ka = np.floor((a - off) / width)
        kb = np.floor((b - off) / width)
        for k in range(int(ka), int(kb) + 1):
            lo = max(a, off + k * width)
            hi = min(b, off + (k + 1) * width)
            if hi > lo:
                masses[int(k) % m] += hi - lo
    return masses


def polygon_ball_area_profile(vertices, cells: BoundaryCellComplex):
    """Exact S_0 and S_1 of a polygon relative to the unit-disc gauge.

    S_1 is the edge-length atom measure; S_0 is arc-length measure on the
    vertex normal fans (total 2pi). Returns {0: masses, 1: masses}.
    """
    normals, lengths, V = polygon_edge_data(vertices)
    s1 = np.bincount(cells.locate(normals), weights=lengths, minlength=cells.m)
    ang = np.arctan2(normals[:, 1], normals[:, 0])
    # vertex i+1 sits between edge i and edge i+1; its normal fan spans
    # [ang_i, ang_{i+1}] going counterclockwise
    starts, ends = [], []
    k = len(ang)
    for i in range(k):
        a = ang[i]
        b = ang[(i + 1) % k]
        while b < a:
            b += 2 * np.pi
        starts.append(a)
        ends.append(b)
    s0 = _arc_overlap_masses(starts, ends, cells)
    return {0: s0, 1: s1}


def planar_parallel_area(vertices, rho: float) -> float:
    """area(P + rho * disc) for a convex polygon, Euclidean gauge."""
    return polygon_area(vertices) + polygon_perimeter(vertices) * rho + np.pi * rho ** 2


def planar_parallel_perimeter(vertices, rho: float) -> float:
    return polygon_perimeter(vertices) + 2 * np.pi * rho


# ------------------------------------------------------- distance oracles
def exact_polygon_distance(vertices, x) -> float:
    """Euclidean distance from x to a convex polygon (0 inside)."""
    normals, _, V = polygon_edge_data(vertices)
    x = np.asarray(x, dtype=float)
    if np.all(np.einsum("ij,j->i", normals, x) <= np.einsum("ij,ij->i", normals, V) + 1e-12):
        return 0.0
    W = np.roll(V, -1, axis=0)
    d = W - V
    t = np.clip(np.einsum("ij,ij->i", x - V, d) / np.einsum("ij,ij->i", d, d), 0.0, 1.0)
    proj = V + t[:, None] * d
    return float(np.min(np.linalg.norm(proj - x, axis=1)))


def exact_polytope_distance(vertices, x) -> float:
    """Euclidean distance from x to a convex polytope, n = 2 or 3."""
    V = np.asarray(vertices, dtype=float)
    if V.shape[1] == 2:
        return exact_polygon_distance(V, x)
    hull = ConvexHull(V)
    x = np.asarray(x, dtype=float)
    eq = hull.equations
    if np.all(eq[:, :-1] @ x + eq[:, -1] <= 1e-12):
        return 0.0
    best = np.inf
    for simplex in hull.simplices:
        best = min(best, _point_triangle_distance(x, V[simplex[0]], V[simplex[1]],
                                                  V[simplex[2]]))
    return float(best)


def _point_triangle_distance(p, a, b, c) -> float:
    ab, ac, ap = b - a, c - a, p - a
    d1, d2 = ab @ ap, ac @ ap
    if d1 <= 0 and d2 <= 0:
        return float(np.linalg.norm(ap))
    bp = p - b
    d3, d4 = ab @ bp, ac @ bp
    if d3 >= 0 and d4 <= d3:
        return float(np.linalg.norm(bp))
    vc = d1 * d4 - d3 * d2
    if vc <= 0 and d1 >= 0 and d3 <= 0:
        t = d1 / (d1 - d3)
        return float(np.linalg.norm(ap - t * ab))
    cp = p - c
    d5, d6 = ab @ cp, ac @ cp
    if d6 >= 0 and d5 <= d6:
        return float(np.linalg.norm(cp))
    vb = d5 * d2 - d1 * d6
    if vb <= 0 and d2 >= 0 and d6 <= 0:
        t = d2 / (d2 - d6)
        return float(np.linalg.norm(ap - t * ac))
    va = d3 * d6 - d5 * d4
    if va <= 0 and (d4 - d3) >= 0 and (d5 - d6) >= 0:
        t = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        return float(np.linalg.norm(bp - t * (c - b)))
    denom = 1.0 / (va + vb + vc)
    v = vb * denom
    w = vc * denom
    return float(np.linalg.norm(ap - v * ab - w * ac))


def grid_gauge_distance(K, E, x, resolution: int = 2000,
                        boundary_points: int = 200000) -> float:
    """Brute-force upper bound on min_{y in K} g_E(x - y).

    Dense interior grid plus (for polytopes) a dense boundary sample; the
    minimizer lies on bd K whenever x is outside, so the boundary sample
    controls the bias.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    # `resolution` counts per-axis points in 2d; keep the total grid size
    # roughly constant as the dimension grows
    resolution = max(8, int(round(resolution ** (2.0 / n))))
    cand = []
    verts = getattr(K, "vertices", None)
    if verts is not None:
        V = np.asarray(verts, dtype=float)
        cand.append(V)
        if n == 2:
            Vc = _ccw_vertices(V)
            W = np.roll(Vc, -1, axis=0)
            lens = np.linalg.norm(W - Vc, axis=1)
            per_edge = np.maximum((boundary_points * lens / lens.sum()).astype(int), 2)
            for v, w, ke in zip(Vc, W, per_edge):
                t = np.linspace(0.0, 1.0, ke)
                cand.append(v + t[:, None] * (w - v))
        else:
            hull = ConvexHull(V)
            per_tri = max(2, int(np.sqrt(boundary_points / max(len(hull.simplices), 1))))
            bw = [(i / per_tri, j / per_tri) for i in range(per_tri + 1)
                  for j in range(per_tri + 1 - i)]
            bw = np.array(bw)
            for simplex in hull.simplices:
                a, b, c = V[simplex]
                cand.append(a + bw[:, :1] * (b - a) + bw[:, 1:] * (c - a))
        lo, hi = V.min(axis=0), V.max(axis=0)
        axes = [np.linspace(lo[i], hi[i], resolution) for i in range(n)]
        mesh = np.meshgrid(*axes, indexing="ij")
        G = np.stack([g.ravel() for g in mesh], axis=1)
        normals, _, Vc2 = (polygon_edge_data(V) if n == 2 else (None, None, None))
        if n == 2:
            b = np.einsum("ij,ij->i", normals, Vc2)
            inside = np.all(G @ normals.T <= b[None, :] + 1e-12, axis=1)
        else:
            eq = ConvexHull(V).equations
            inside = np.all(G @ eq[:, :-1].T + eq[:, -1][None, :] <= 1e-12, axis=1)
        cand.append(G[inside])
    else:
        c, R = K.bounding_ball()
        axes = [np.linspace(c[i] - R, c[i] + R, resolution) for i in range(n)]
        mesh = np.meshgrid(*axes, indexing="ij")
        G = np.stack([g.ravel() for g in mesh], axis=1)
        keep = np.array([K.membership(g) for g in G[:50000]]) if len(G) <= 50000 else None
        if keep is None:
            raise InvalidSpec("grid oracle without vertices limited to 50000 points")
        cand.append(G[:50000][keep])
    Y = np.vstack(cand)
    best = np.inf
    for i0 in range(0, len(Y), 1 << 20):
        best = min(best, float(np.min(E.gauge(x - Y[i0:i0 + (1 << 20)]))))
    return best


# ---------------------------------------------------------------- volumes
def ball_volume(n: int, R: float = 1.0) -> float:
    from scipy.special import gamma
    return float(np.pi ** (n / 2) / gamma(n / 2 + 1) * R ** n)


def ellipsoid_volume(A) -> float:
    """Volume of {x : sqrt(x' A^{-1} x) <= 1}, i.e. h(u) = sqrt(u' A u)."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    return ball_volume(n) * float(np.sqrt(np.linalg.det(A)))


def box_parallel_volume(dims, t: float) -> float:
    """vol(box + t * unit ball), n = 2 or 3."""
    d = np.asarray(dims, dtype=float)
    if d.size == 2:
        a, b = d
        return a * b + 2 * (a + b) * t + np.pi * t ** 2
    a, b, c = d
    return (a * b * c + 2 * (a * b + a * c + b * c) * t
            + np.pi * (a + b + c) * t ** 2 + 4 * np.pi / 3 * t ** 3)


def box_mixed_volumes(dims) -> np.ndarray:
    """V_j = V(box[j], ball[n-j]) for j = 0..n, from the parallel volume."""
    d = np.asarray(dims, dtype=float)
    if d.size == 2:
        a, b = d
        return np.array([np.pi, a + b, a * b])
    a, b, c = d
    return np.array([4 * np.pi / 3, np.pi * (a + b + c) / 3,
                     2 * (a * b + a * c + b * c) / 3, a * b * c])


def cap_body_mixed_volumes(L: float) -> np.ndarray:
    """V_j for conv(B^3 cup {L e_1}) against the unit-ball gauge, L > 1.

    The middle coefficients coincide: V_1 = V_2 = (pi/3)(L + 1/L + 2),
    reflecting that the hull of a ball and one outside point is a
    1-tangential body of the ball.
    """
    if L <= 1:
        raise InvalidSpec("apex must lie outside the unit ball")
    v12 = np.pi / 3 * (L + 1.0 / L + 2.0)
    h = 1.0 - 1.0 / L
    cap = np.pi * h * h * (3.0 - h) / 3.0
    cone = np.pi * L / 3.0 * (1.0 - 1.0 / L ** 2) ** 2
    v3 = 4 * np.pi / 3 - cap + cone
    return np.array([4 * np.pi / 3, v12, v12, v3])


def cap_body_distance(x, L: float) -> float:
    """Euclidean distance to conv(B^3 cup {L e_1}), direct 2-d reduction."""
    x = np.asarray(x, dtype=float)
    xi = x[0]
    eta = float(np.linalg.norm(x[1:]))
    r = float(np.hypot(xi, eta))
    ct = 1.0 / L  # tangent circle at height xi = 1/L on the unit sphere
    st = np.sqrt(1.0 - ct * ct)
    # inside: unit ball, or the cone between the tangent plane and the apex
    if r <= 1.0:
        return 0.0
    if ct <= xi <= L and eta * np.sqrt(L * L - 1.0) <= L - xi:
        return 0.0
    best = np.inf
    if xi <= ct * r:  # nearest sphere point lies on the kept spherical part
        best = r - 1.0
    T = np.array([ct, st])
    A = np.array([L, 0.0])
    d = A - T
    t = np.clip((np.array([xi, eta]) - T) @ d / (d @ d), 0.0, 1.0)
    best = min(best, float(np.linalg.norm(T + t * d - np.array([xi, eta]))))
    return best


def ball_area_profile(R: float, cells: BoundaryCellComplex):
    """S_k of K = R*B^n relative to E = B^n: R^k times spherical measure."""
    return {k: R ** k * cells.areas.copy() for k in range(cells.n)}
