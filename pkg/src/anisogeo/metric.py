"""Gauge distance, projection, relative normals, and shell sampling.

For a convex body K and gauge body E the relative distance is

    d(K, E; x) = min_{y in K} g_E(x - y),

attained at the projection p(x). For x outside K the relative normal data
are y*(x) = (x - p(x)) / d in bd E and the unit normal u(x) of E at y*.
All estimators in the package reduce to batched evaluations of this map.
"""
from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import rng as _rng
from ._dispatch import edist_batch as _edist_raw
from ._dispatch import kernel_name
from .bodies import ConvexBody
from .errors import EmptyShellWarning, NoConvergence
from .gauges import GaugeBody

_BATCH = 1 << 17  # internal solve chunk (memory bound, not an RNG boundary)


@dataclass(frozen=True)
class EDistanceResult:
    d: float
    p: np.ndarray
    y: np.ndarray | None
    u: np.ndarray | None
    gap: float
    iterations: int
    converged: bool


def _solve_scale(K: ConvexBody, X: np.ndarray) -> float:
    c, r = K.bounding_ball()
    xmax = float(np.max(np.abs(X))) if X.size else 0.0
    return max(1.0, r + float(np.linalg.norm(c)), xmax)


def e_distance_batch(K: ConvexBody, E: GaugeBody, X, tol: float = 1e-9,
                     maxiter: int = 10000, workers: int = 1,
                     raise_on_fail: bool = True, with_normals: bool = False,
                     exit_levels=None, exit_cells=None):
    """Vectorized distance solve. Returns dict with d, P (+ y, u, h_eu).

    Results are independent of `workers` (fixed chunking, ordered writes).
    Raises NoConvergence if any point fails and raise_on_fail is set.
    exit_levels/exit_cells allow certified early exits for points whose
    exact distance is irrelevant (only the classification against the levels
    is preserved); see _kernels_py.edist_batch.
    """
    X = np.ascontiguousarray(np.asarray(X, dtype=float))
    if X.ndim != 2:
        raise ValueError("X must be (m, n)")
    m = X.shape[0]
    scale = _solve_scale(K, X)
    out = {"d": np.empty(m), "P": np.empty_like(X), "gap": np.empty(m),
           "iters": np.empty(m, dtype=np.int64), "conv": np.empty(m, dtype=bool)}

    def run(i0: int) -> None:
        sl = slice(i0, min(i0 + _BATCH, m))
        res = _edist_raw(K, E, X[sl], tol, maxiter, scale,
                         exit_levels=exit_levels, exit_cells=exit_cells)
        for k in out:
            out[k][sl] = res[k]

    starts = range(0, m, _BATCH)
    if workers > 1 and m > _BATCH:
        with ThreadPoolExecutor(max_workers=int(workers)) as ex:
            list(ex.map(run, starts))
    else:
        for i0 in starts:
            run(i0)

    if raise_on_fail and not np.all(out["conv"]):
        bad = np.flatnonzero(~out["conv"])
        raise NoConvergence(int(out["iters"][bad[0]]), float(out["gap"][bad[0]]),
                            f"{bad.size} point(s) unconverged")
    if with_normals:
        d = out["d"]
        pos = d > 0
        Y = np.full_like(X, np.nan)
        U = np.full_like(X, np.nan)
        if np.any(pos):
            Yp = (X[pos] - out["P"][pos]) / d[pos, None]
            Up = E.gauss_map(Yp, tol=np.inf)
            Y[pos] = Yp
            U[pos] = Up
        out["y"] = Y
        out["u"] = U
        hE = np.full(m, np.nan)
        if np.any(pos):
            hE[pos] = np.atleast_1d(E.h(U[pos]))
        out["h_eu"] = hE
    return out


def e_distance(K: ConvexBody, E: GaugeBody, x, tol: float = 1e-9,
               maxiter: int = 10000) -> EDistanceResult:
    """Distance of a single point with projection and relative normal data.

    y and u are None when d = 0 (the normal is undefined inside K).
    """
    x = np.asarray(x, dtype=float)
    res = e_distance_batch(K, E, x[None, :], tol=tol, maxiter=maxiter,
                           with_normals=True)
    d = float(res["d"][0])
    return EDistanceResult(
        d=d, p=res["P"][0],
        y=None if d == 0.0 else res["y"][0],
        u=None if d == 0.0 else res["u"][0],
        gap=float(res["gap"][0]), iterations=int(res["iters"][0]),
        converged=bool(res["conv"][0]))


def parallel_membership(K: ConvexBody, E: GaugeBody, rho: float, x,
                        tol: float = 1e-9) -> bool:
    """x in K + rho * E, via d(K, E; x) <= rho (within tol)."""
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    if rho == 0.0:
        return K.membership(x, tol)
    return e_distance(K, E, x, tol=min(tol, 1e-9)).d <= rho + tol


def lipschitz_witness(K: ConvexBody, E: GaugeBody, x1, x2,
                      tol: float = 1e-9) -> tuple[float, float]:
    """Return (|d(x1) - d(x2)|, |x1 - x2| / r0(E)).

    The distance function is Lipschitz with constant 1/r0(E) in the
    Euclidean norm, r0 the inradius of E; lhs <= rhs up to solver tolerance.
    """
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    res = e_distance_batch(K, E, np.stack([x1, x2]), tol=tol)
    lhs = float(np.abs(res["d"][0] - res["d"][1]))
    rhs = float(np.linalg.norm(x1 - x2) / E.inradius())
    return lhs, rhs


def sample_box(K: ConvexBody, E: GaugeBody, rho: float) -> tuple[np.ndarray, np.ndarray]:
    """Tight axis-aligned bounding box of K + rho * E."""
    n = K.n
    eye = np.eye(n)
    hi = np.array([float(np.atleast_1d(K.h(eye[i]))[0]) + rho * float(np.atleast_1d(E.h(eye[i]))[0])
                   for i in range(n)])
    lo = -np.array([float(np.atleast_1d(K.h(-eye[i]))[0]) + rho * float(np.atleast_1d(E.h(-eye[i]))[0])
                    for i in range(n)])
    return lo, hi


@dataclass
class ShellBatch:
    """Accepted samples of the shell {x : rho1 < d(K, E; x) <= rho2}."""

    x: np.ndarray
    d: np.ndarray
    p: np.ndarray
    y: np.ndarray
    u: np.ndarray
    h_eu: np.ndarray
    weight: float          # box_volume / draws, per accepted sample
    draws: int
    box_lo: np.ndarray
    box_hi: np.ndarray
    box_volume: float
    seed: int = 0
    rho1: float = 0.0
    rho2: float = 0.0

    @property
    def accepted(self) -> int:
        return int(self.d.size)


def shell_sample(K: ConvexBody, E: GaugeBody, rho1: float, rho2: float,
                 count: int, seed: int, workers: int = 1, tol: float = 1e-9,
                 maxiter: int = 10000) -> ShellBatch:
    """Uniform box sampling of the (rho1, rho2] shell around K.

    `count` box draws from the tight bounding box of K + rho2 E; draws with
    rho1 < d <= rho2 are kept, each carrying weight box_volume / count.
    Chunked Philox substreams keyed (seed, chunk) make the output identical
    for every worker count.
    """
    if not (0 <= rho1 < rho2):
        raise ValueError("need 0 <= rho1 < rho2")
    lo, hi = sample_box(K, E, rho2)
    box_volume = float(np.prod(hi - lo))
    scale = _solve_scale(K, np.stack([lo, hi]))
    # points outside the shell may stop on a classification certificate;
    # accepted points always converge to the full gap tolerance
    levels = np.array([rho1, rho2])
    cells = np.array([True, False, True])

    def run(i: int):
        Xc = _rng.box_chunk(seed, (), i, count, lo, hi)
        res = _edist_raw(K, E, Xc, tol, maxiter, scale,
                         exit_levels=levels, exit_cells=cells)
        if not np.all(res["conv"]):
            j = int(np.flatnonzero(~res["conv"])[0])
            raise NoConvergence(int(res["iters"][j]), float(res["gap"][j]))
        keep = (res["d"] > rho1) & (res["d"] <= rho2)
        return Xc[keep], res["d"][keep], res["P"][keep]

    parts = _rng.map_chunks(run, count, workers)
    X = np.concatenate([p[0] for p in parts], axis=0)
    D = np.concatenate([p[1] for p in parts], axis=0)
    P = np.concatenate([p[2] for p in parts], axis=0)
    if X.shape[0] == 0:
        warnings.warn(f"shell ({rho1:g}, {rho2:g}] received no hits",
                      EmptyShellWarning)
        nan = np.empty((0, K.n))
        return ShellBatch(nan, D, nan.copy(), nan.copy(), nan.copy(),
                          np.empty(0), box_volume / count, count, lo, hi,
                          box_volume, seed, rho1, rho2)
    Y = (X - P) / D[:, None]
    U = E.gauss_map(Y, tol=np.inf)
    hE = np.atleast_1d(E.h(U))
    return ShellBatch(X, D, P, Y, U, hE, box_volume / count, count, lo, hi,
                      box_volume, seed, rho1, rho2)


def active_kernel() -> str:
    """Name of the distance kernel in use ('compiled' or 'python')."""
    return kernel_name()
