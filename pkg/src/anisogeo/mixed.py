"""Volumes, mixed-volume tables, chain checks, and tangential detection.

vol(K + tE) is a polynomial in t >= 0 whose coefficients, in the binomial
basis, are the mixed volumes V_j = V(K[j], E[n-j]). steiner_fit estimates
the parallel volumes at several t-nodes with common random numbers (one
point pool, thresholded at every node) and solves for the table by least
squares; CRN makes differences of coefficients far more precise than the
coefficients themselves, which is what the equality-chain tests need.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull
from scipy.special import binom

from . import rng as _rng
from .bodies import (Ball, ConvexBody, EllipsoidBody, SmoothBody, VPolytope)
from .errors import ChainViolation, IllConditioned, InvalidSpec, NoConvergence
from .gauges import BallGauge, GaugeBody
from .metric import _solve_scale, sample_box
from ._dispatch import edist_batch as _edist_raw


def _member_batch(K: ConvexBody, X: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Vectorized membership for the Monte Carlo volume estimator."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if isinstance(K, VPolytope):
        A, b = K._facet_data()
        return np.all(X @ A.T <= b[None, :] + tol, axis=1)
    if isinstance(K, Ball):
        return np.linalg.norm(X - K.center, axis=1) <= K.radius + tol
    if isinstance(K, EllipsoidBody):
        Z = X - K.center
        return np.einsum("ij,jk,ik->i", Z, K.Ainv, Z) <= 1.0 + tol
    if isinstance(K, SmoothBody) and K._gauge is not None:
        return np.atleast_1d(K._gauge(X)) <= 1.0 + tol
    # generic: zero E-distance against the Euclidean ball gauge
    scale = _solve_scale(K, X)
    res = _edist_raw(K, BallGauge(1.0, K.n), X, tol, 10000, scale)
    return res["d"] <= tol * scale


def volume(K: ConvexBody, N: int = 1_000_000, seed: int = 0,
           workers: int = 1) -> tuple[float, float]:
    """(volume, stderr). Exact for vertex polytopes in n <= 3 (stderr 0),
    Monte Carlo hit counting otherwise."""
    if isinstance(K, VPolytope) and K.n <= 3:
        return float(ConvexHull(K.vertices).volume), 0.0
    c, R = K.bounding_ball()
    lo, hi = c - R, c + R
    box = float(np.prod(hi - lo))

    def run(i: int) -> int:
        pts = _rng.box_chunk(seed, (), i, N, lo, hi)
        return int(np.count_nonzero(_member_batch(K, pts)))

    hits = sum(_rng.map_chunks(run, N, workers))
    p = hits / N
    return box * p, box * float(np.sqrt(max(p * (1 - p), 0.0) / N))


@dataclass
class MixedVolumeTable:
    """V_j = V(K[j], E[n-j]) for j = 0..n with fit uncertainty."""

    n: int
    V: np.ndarray
    stderr: np.ndarray
    cov: np.ndarray
    residual: float
    t_nodes: np.ndarray
    N: int
    seed: int
    meta: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        lines = ["j,V,stderr"]
        for j in range(self.n + 1):
            lines.append(f"{j},{float(self.V[j])!r},{float(self.stderr[j])!r}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        obj = {"n": self.n, "V": self.V.tolist(),
               "stderr": self.stderr.tolist(),
               "residual": self.residual,
               "t_nodes": self.t_nodes.tolist(),
               "N": self.N, "seed": self.seed}
        return json.dumps(obj, sort_keys=True)


def default_t_nodes(n: int, count: int | None = None) -> np.ndarray:
    count = 2 * (n + 1) if count is None else count
    a, b = 0.1, 1.5
    i = np.arange(count)
    x = np.cos(np.pi * (2 * i + 1) / (2 * count))
    return np.sort((a + b) / 2 + (b - a) / 2 * x)


def steiner_fit(K: ConvexBody, E: GaugeBody, t_nodes=None,
                N: int = 1_000_000, seed: int = 0, workers: int = 1,
                tol: float = 1e-9, maxiter: int = 10000) -> MixedVolumeTable:
    """Fit V_0..V_n from Monte Carlo parallel volumes vol(K + tE).

    One pool of box points is drawn in the bounding box of K + t_max E and
    the distance of each point is thresholded at every node (common random
    numbers); the node estimates are therefore positively correlated, with
    exactly computable covariance (nested indicators), which the fit
    propagates to the coefficients.
    """
    n = K.n
    t_nodes = default_t_nodes(n) if t_nodes is None else np.sort(
        np.asarray(t_nodes, dtype=float))
    R = len(t_nodes)
    if R < n + 1:
        raise InvalidSpec(f"need at least {n + 1} t-nodes")
    if t_nodes[0] <= 0 or np.any(np.diff(t_nodes) <= 0):
        raise InvalidSpec("t-nodes must be positive and distinct")
    lo, hi = sample_box(K, E, float(t_nodes[-1]))
    box = float(np.prod(hi - lo))
    scale = _solve_scale(K, np.stack([lo, hi]))
    flags = np.ones(R + 1, dtype=bool)

    def run(i: int) -> np.ndarray:
        pts = _rng.box_chunk(seed, (), i, N, lo, hi)
        res = _edist_raw(K, E, pts, tol, maxiter, scale,
                         exit_levels=t_nodes, exit_cells=flags)
        if not np.all(res["conv"]):
            j = int(np.flatnonzero(~res["conv"])[0])
            raise NoConvergence(int(res["iters"][j]), float(res["gap"][j]))
        idx = np.searchsorted(t_nodes, res["d"], side="left")
        return np.bincount(idx, minlength=R + 1)

    tallies = _rng.map_chunks(run, N, workers)
    counts = np.sum(np.array(tallies, dtype=np.int64), axis=0)
    leq = np.cumsum(counts)[:R]          # points with d <= t_r
    p = leq / N
    vols = box * p
    # Cov(vol_r, vol_s) = box^2 (p_min(r,s) - p_r p_s) / N
    pmin = np.minimum.outer(p, p)
    C = box * box * (pmin - np.outer(p, p)) / N
    B = np.empty((R, n + 1))
    for j in range(n + 1):
        B[:, j] = binom(n, j) * t_nodes ** (n - j)
    cond = float(np.linalg.cond(B))
    if cond > 1e8:
        raise IllConditioned(f"Steiner design condition {cond:.3e}")
    P = np.linalg.pinv(B)
    V = P @ vols
    cov = P @ C @ P.T
    stderr = np.sqrt(np.maximum(np.diag(cov), 0.0))
    residual = float(np.linalg.norm(B @ V - vols))
    return MixedVolumeTable(n, V, stderr, cov, residual, t_nodes, int(N),
                            int(seed), {"box_volume": box, "cond": cond})


@dataclass
class ChainReport:
    ratios: np.ndarray       # r_j = V_j / V_{j+1}, j = 0..n-1
    ratio_sigma: np.ndarray
    monotone_margins: np.ndarray   # r_{j+1} - r_j, should be >= -3 sigma
    logconc_margins: np.ndarray    # V_j^2 - V_{j-1} V_{j+1}
    ok: bool


def af_chain(table: MixedVolumeTable, raise_on_violation: bool = True
             ) -> ChainReport:
    """Ratio chain r_j = V_j / V_{j+1} nondecreasing in j, equivalently
    log-concavity of the V_j; violations beyond 3 sigma mean estimator
    trouble, since the underlying inequalities are theorems."""
    n, V, S = table.n, table.V, table.cov
    ratios = V[:-1] / V[1:]
    rsig = np.empty(n)
    for j in range(n):
        g = np.zeros(n + 1)
        g[j] = 1.0 / V[j + 1]
        g[j + 1] = -V[j] / V[j + 1] ** 2
        rsig[j] = np.sqrt(max(g @ S @ g, 0.0))
    mono = np.empty(max(n - 1, 0))
    mono_sig = np.empty_like(mono)
    for j in range(1, n):
        # gradient of r_j - r_{j-1} with r_j = V_j / V_{j+1}
        g = np.zeros(n + 1)
        g[j] += 1.0 / V[j + 1]
        g[j + 1] += -V[j] / V[j + 1] ** 2
        g[j - 1] -= 1.0 / V[j]
        g[j] -= -V[j - 1] / V[j] ** 2
        mono[j - 1] = ratios[j] - ratios[j - 1]
        mono_sig[j - 1] = np.sqrt(max(g @ S @ g, 0.0))
    logc = np.empty(max(n - 1, 0))
    logc_sig = np.empty_like(logc)
    for j in range(1, n):
        g = np.zeros(n + 1)
        g[j] = 2 * V[j]
        g[j - 1] = -V[j + 1]
        g[j + 1] = -V[j - 1]
        logc[j - 1] = V[j] ** 2 - V[j - 1] * V[j + 1]
        logc_sig[j - 1] = np.sqrt(max(g @ S @ g, 0.0))
    ok = bool(np.all(mono >= -3 * mono_sig) and np.all(logc >= -3 * logc_sig))
    if not ok and raise_on_violation:
        raise ChainViolation(
            f"ratio margins {mono} (3sigma {3 * mono_sig}), "
            f"log-concavity margins {logc} (3sigma {3 * logc_sig})")
    return ChainReport(ratios, rsig, mono, logc, ok)


@dataclass
class TangentialReport:
    k: int | None
    r: float
    r_sigma: float
    gaps: np.ndarray         # per candidate k: worst relative pairwise gap
    contains: bool | None    # K contains a translate of r E (None: no K, E)
    slack: float | None


def _containment_slack(K: ConvexBody, E: GaugeBody, r: float,
                       n_dirs: int = 512) -> float:
    """max over translations t of min_u [h_K(u) - r h_E(u) - <t, u>] on a
    deterministic direction sample; >= 0 iff some translate of rE fits
    inside K (up to sampling of directions)."""
    from .gauges import _unit_sample
    U = np.vstack([np.eye(K.n), -np.eye(K.n), _unit_sample(K.n, n_dirs)])
    hK = np.array([float(np.atleast_1d(K.h(u))[0]) for u in U])
    hE = np.atleast_1d(E.h(U))
    res = linprog(c=np.r_[np.zeros(K.n), -1.0],
                  A_ub=np.hstack([U, np.ones((len(U), 1))]),
                  b_ub=hK - r * hE,
                  bounds=[(None, None)] * (K.n + 1), method="highs")
    if not res.success:
        raise InvalidSpec(f"containment LP failed: {res.message}")
    return float(-res.fun)


def tangential_detect(table: MixedVolumeTable, tol: float = 0.02,
                      K: ConvexBody | None = None,
                      E: GaugeBody | None = None) -> TangentialReport:
    """Detect the tangential order from the mixed-volume table.

    r = V_n / V_{n-1}; after the homothety K -> K / r the equality chain
    V_k = ... = V_n (relative gaps <= tol + 3 sigma) determines the smallest
    admissible k. Because the rescaling forces the last two entries to
    agree, the chain alone cannot reject: the defining requirement that K
    contain a translate of r E is checked by a support-function LP whenever
    K and E are supplied, and detection reports none if it fails.
    """
    n, V, S = table.n, table.V, table.cov
    r = float(V[n] / V[n - 1])
    g = np.zeros(n + 1)
    g[n] = 1.0 / V[n - 1]
    g[n - 1] = -V[n] / V[n - 1] ** 2
    r_sigma = float(np.sqrt(max(g @ S @ g, 0.0)))
    contains: bool | None = None
    slack = None
    if K is not None and E is not None:
        hmax = float(np.max(np.atleast_1d(E.h(np.vstack([np.eye(n), -np.eye(n)])))))
        slack = _containment_slack(K, E, r)
        contains = slack >= -(tol * r * hmax + 3 * r_sigma * hmax)
    scalev = r ** np.arange(n + 1)
    Vt = V / scalev
    St = S / np.outer(scalev, scalev)
    gaps = np.empty(n)
    found = None
    for k in range(n):
        worst = 0.0
        ok = True
        for i in range(k, n + 1):
            for j in range(i + 1, n + 1):
                gap = abs(Vt[i] - Vt[j]) / Vt[n]
                sig = np.sqrt(max(St[i, i] + St[j, j] - 2 * St[i, j], 0.0)) / Vt[n]
                worst = max(worst, gap)
                if gap > tol + 3 * sig:
                    ok = False
        gaps[k] = worst
        if ok and found is None:
            found = k
    if contains is False:
        found = None
    return TangentialReport(found, r, r_sigma, gaps, contains, slack)
