"""Anisotropic area, support, and curvature measures from shell sampling.

The local parallel-set boundary content obeys a polynomial identity in the
parallel parameter rho whose coefficients are the area measures S_0..S_{n-1}
on cells of directions. We estimate window-averaged boundary contents from
Monte Carlo shell volumes (the coarea factor 1 / h_E(u) converts shell
volume to surface content, since |grad d| = 1 / h_E(u) at a point with
relative normal direction u) and solve for the coefficients per cell by
least squares over several rho windows.

A window (rho - delta/2, rho + delta/2] estimates the exact rho-integral of
the boundary content over the window, so the design matrix uses integrated
monomials rather than point evaluations; the identity being polynomial in
rho, this removes the windowing bias entirely.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import binom, ndtri

from .bodies import ConvexBody
from .cells import BoundaryCellComplex, SpatialGrid
from .errors import (DegenerateProfile, IllConditioned, InvalidSpec,
                     NegativeMass)
from .gauges import GaugeBody
from .metric import shell_sample


@dataclass
class CellMeasure:
    """A discretized nonnegative measure on boundary cells."""

    masses: np.ndarray       # clamped to >= 0
    stderr: np.ndarray
    total: float
    raw_masses: np.ndarray   # pre-clamp fit output
    clamped: np.ndarray      # bool: cell was negative and clamped to 0

    @staticmethod
    def from_raw(raw: np.ndarray, stderr: np.ndarray, z_fail: float) -> "CellMeasure":
        bad = raw < -z_fail * stderr
        if np.any(bad):
            j = int(np.argmin(raw / np.maximum(stderr, 1e-300)))
            raise NegativeMass(
                f"cell {j}: fitted mass {raw[j]:.3e} below -{z_fail:.2f} x "
                f"stderr {stderr[j]:.3e}")
        clamped = raw < 0
        masses = np.where(clamped, 0.0, raw)
        return CellMeasure(masses, stderr, float(masses.sum()), raw, clamped)


@dataclass
class AreaMeasureProfile:
    """S_0..S_{n-1} cell masses with uncertainty and fit metadata."""

    n: int
    cells: BoundaryCellComplex
    measures: dict[int, CellMeasure]
    cov: np.ndarray          # (n, n, m) per-cell coefficient covariance
    meta: dict = field(default_factory=dict)

    def totals(self) -> dict[int, float]:
        return {k: cm.total for k, cm in self.measures.items()}

    def weighted_total(self, k: int, values: np.ndarray) -> tuple[float, float]:
        """(sum_c values_c * S_k(c), its stderr); values e.g. h_E(u_c)."""
        cm = self.measures[k]
        v = float(values @ cm.masses)
        s = float(np.sqrt(np.sum(values ** 2 * cm.stderr ** 2)))
        return v, s

    def to_csv(self) -> str:
        ks = sorted(self.measures)
        cols = ["cell_id"] + [f"u{i}" for i in range(self.n)] + ["area"]
        cols += [f"S{k}" for k in ks] + [f"stderr{k}" for k in ks]
        lines = [",".join(cols)]
        for c in range(self.cells.m):
            row = [str(c)] + [repr(float(x)) for x in self.cells.reps[c]]
            row.append(repr(float(self.cells.areas[c])))
            row += [repr(float(self.measures[k].masses[c])) for k in ks]
            row += [repr(float(self.measures[k].stderr[c])) for k in ks]
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        ks = sorted(self.measures)
        obj = {
            "n": self.n,
            "m_cells": self.cells.m,
            "totals": {str(k): self.measures[k].total for k in ks},
            "masses": {str(k): self.measures[k].masses.tolist() for k in ks},
            "stderr": {str(k): self.measures[k].stderr.tolist() for k in ks},
            "meta": {key: (val.tolist() if isinstance(val, np.ndarray) else val)
                     for key, val in self.meta.items()},
        }
        return json.dumps(obj, sort_keys=True)


@dataclass
class SupportMeasureEstimate:
    """Theta_k masses on (spatial box) x (boundary cell) product cells."""

    n: int
    grid: SpatialGrid
    cells: BoundaryCellComplex
    masses: np.ndarray       # (n, grid.m, cells.m), clamped
    stderr: np.ndarray
    raw_masses: np.ndarray
    cov: np.ndarray          # (n, n, grid.m, cells.m)
    meta: dict = field(default_factory=dict)

    def area_profile(self) -> AreaMeasureProfile:
        """Marginal over spatial cells: the area-measure profile."""
        n = self.n
        raw = self.raw_masses.sum(axis=1)
        var = np.sum(self.stderr ** 2, axis=1)
        se = np.sqrt(var)
        zf = float(self.meta.get("z_fail", 6.0))
        measures = {k: CellMeasure.from_raw(raw[k], se[k], zf) for k in range(n)}
        return AreaMeasureProfile(n, self.cells, measures,
                                  self.cov.sum(axis=2), dict(self.meta))

    def to_json(self) -> str:
        obj = {
            "n": self.n,
            "grid": {"lo": self.grid.lo.tolist(), "hi": self.grid.hi.tolist(),
                     "shape": list(self.grid.shape)},
            "cells": {"kind": self.cells.kind, "m": self.cells.m},
            "masses": self.masses.tolist(),
            "stderr": self.stderr.tolist(),
            "meta": {k: v for k, v in self.meta.items()
                     if isinstance(v, (int, float, str, bool))},
        }
        return json.dumps(obj, sort_keys=True, indent=1)


def curvature_measures(est: SupportMeasureEstimate) -> dict[int, CellMeasure]:
    """C_k on spatial cells: marginal of the support measures over the
    boundary-cell axis."""
    out = {}
    zf = float(est.meta.get("z_fail", 6.0))
    for k in range(est.n):
        raw = est.raw_masses[k].sum(axis=1)
        se = np.sqrt(np.sum(est.stderr[k] ** 2, axis=1))
        out[k] = CellMeasure.from_raw(raw, se, zf)
    return out


# --------------------------------------------------------------- estimation
def _node_seed(seed: int, r: int) -> int:
    return int(np.random.SeedSequence((seed, 7, r)).generate_state(1)[0])


def _window_histogram(K, E, cells, grid, rho, delta, N, seed, workers, tol,
                      maxiter):
    """Window-averaged boundary content per (spatial, boundary) cell.

    Returns (masses, variances) flattened over grid.m * cells.m cells.
    """
    if not (rho > 0 and 0 < delta <= 2 * rho):
        raise InvalidSpec("need rho > 0 and 0 < delta <= 2 rho")
    batch = shell_sample(K, E, rho - delta / 2, rho + delta / 2, N, seed,
                         workers=workers, tol=tol, maxiter=maxiter)
    nsp = grid.m if grid is not None else 1
    size = nsp * cells.m
    if batch.accepted == 0:
        return np.zeros(size), np.zeros(size), batch
    inv_h = 1.0 / batch.h_eu
    idx = cells.locate(batch.u)
    if grid is not None:
        idx = grid.locate(batch.p) * cells.m + idx
    w = batch.box_volume / (N * delta)
    s1 = np.bincount(idx, weights=inv_h, minlength=size)
    s2 = np.bincount(idx, weights=inv_h * inv_h, minlength=size)
    masses = w * s1
    var = w * w * (s2 - s1 * s1 / N)
    return masses, var, batch


def estimate_boundary_density(K: ConvexBody, E: GaugeBody,
                              cells: BoundaryCellComplex, rho: float,
                              delta: float, N: int, seed: int,
                              workers: int = 1, tol: float = 1e-9,
                              maxiter: int = 10000) -> CellMeasure:
    """Monte Carlo estimate of the boundary content of the rho-parallel set,
    resolved on boundary cells.

    Each accepted shell sample contributes box_volume / (N delta h_E(u));
    the 1 / h_E(u) factor is the coarea correction described in the module
    docstring.
    """
    masses, var, _ = _window_histogram(K, E, cells, None, rho, delta, N,
                                       seed, workers, tol, maxiter)
    se = np.sqrt(np.maximum(var, 0.0))
    return CellMeasure(masses, se, float(masses.sum()), masses.copy(),
                       np.zeros(masses.shape, dtype=bool))


def _design_matrix(n: int, rho_nodes: np.ndarray, delta: float) -> np.ndarray:
    """Integrated-monomial design: row r, column m holds the window average
    of binom(n-1, m) t^{n-1-m} over (rho_r - delta/2, rho_r + delta/2]."""
    R = len(rho_nodes)
    A = np.empty((R, n))
    for m in range(n):
        p = n - m
        hi = (rho_nodes + delta / 2) ** p
        lo = (rho_nodes - delta / 2) ** p
        A[:, m] = binom(n - 1, m) * (hi - lo) / (delta * p)
    return A


def default_rho_nodes(K: ConvexBody, count: int) -> np.ndarray:
    """Chebyshev-spaced nodes on [0.05, 1.0] x outer radius of K."""
    _, R = K.bounding_ball()
    a, b = 0.05 * R, 1.0 * R
    i = np.arange(count)
    x = np.cos(np.pi * (2 * i + 1) / (2 * count))
    return np.sort((a + b) / 2 + (b - a) / 2 * x)


def _default_delta(rho_nodes: np.ndarray) -> float:
    gaps = np.diff(rho_nodes)
    return 0.9 * float(min(gaps.min() if gaps.size else np.inf,
                           2 * rho_nodes[0]))


def default_cells(n: int, m: int | None = None) -> BoundaryCellComplex:
    if n == 2:
        return BoundaryCellComplex.circle(256 if m is None else m)
    if n == 3:
        if m is None:
            level = 3
        else:
            level = max(0, int(round(np.log2(max(m, 8) / 8) / 2)))
        return BoundaryCellComplex.octahedral(level)
    raise InvalidSpec("cell complexes implemented for n = 2, 3")


def _fit_core(K, E, cells, grid, rho_nodes, delta, N, seed, workers, tol,
              maxiter):
    n = K.n
    rho_nodes = np.sort(np.asarray(rho_nodes, dtype=float))
    if len(rho_nodes) < n:
        raise InvalidSpec(f"need at least {n} rho nodes")
    if delta is None:
        delta = _default_delta(rho_nodes)
    lo = rho_nodes - delta / 2
    hi = rho_nodes + delta / 2
    if lo[0] < 0:
        raise InvalidSpec("smallest window extends below 0")
    if np.any(hi[:-1] > lo[1:] + 1e-12):
        raise InvalidSpec("rho windows overlap; shrink delta")
    A = _design_matrix(n, rho_nodes, delta)
    cond = float(np.linalg.cond(A))
    if cond > 1e8:
        raise IllConditioned(f"design matrix condition {cond:.3e}")
    P = np.linalg.pinv(A)
    M, V = [], []
    boxes = []
    for r, rho in enumerate(rho_nodes):
        m_r, v_r, batch = _window_histogram(K, E, cells, grid, float(rho),
                                            delta, N, _node_seed(seed, r),
                                            workers, tol, maxiter)
        M.append(m_r)
        V.append(v_r)
        boxes.append(batch.box_volume)
    M = np.array(M)            # (R, J)
    V = np.maximum(np.array(V), 0.0)
    coef = P @ M               # (n, J)
    cov = np.einsum("kr,lr,rj->klj", P, P, V)
    se = np.sqrt(np.maximum(np.einsum("kkj->kj", cov), 0.0))
    J = M.shape[1]
    z_fail = max(3.0, float(ndtri(1 - 0.001 / (n * J))))
    meta = {
        "rho_nodes": rho_nodes, "delta": float(delta), "N": int(N),
        "seed": int(seed), "cond": cond, "z_fail": z_fail,
        "box_volumes": np.array(boxes),
    }
    return coef, se, cov, meta


def fit_area_measures(K: ConvexBody, E: GaugeBody,
                      cells: BoundaryCellComplex | None = None,
                      rho_nodes=None, delta: float | None = None,
                      N: int = 1_000_000, seed: int = 0, workers: int = 1,
                      tol: float = 1e-9, maxiter: int = 10000
                      ) -> AreaMeasureProfile:
    """Estimate S_0..S_{n-1} on boundary cells by the windowed Steiner fit.

    Parameters
    ----------
    K, E : body and gauge.
    cells : cell complex on the sphere of directions; defaults to 256 arcs
        (n=2) or the level-3 octahedral subdivision, 512 cells (n=3).
    rho_nodes : window centers; default 2n Chebyshev nodes on
        [0.05, 1.0] x outer radius of K.
    delta : window width; default 0.9 x the smallest node gap.
    N : box draws per window.
    seed : master seed; per-window streams are derived deterministically.

    Returns
    -------
    AreaMeasureProfile with per-cell masses, stderr, and the joint
    coefficient covariance used by proportionality_test.
    """
    n = K.n
    if cells is None:
        cells = default_cells(n)
    if rho_nodes is None:
        rho_nodes = default_rho_nodes(K, 2 * n)
    coef, se, cov, meta = _fit_core(K, E, cells, None, rho_nodes, delta, N,
                                    seed, workers, tol, maxiter)
    measures = {k: CellMeasure.from_raw(coef[k], se[k], meta["z_fail"])
                for k in range(n)}
    return AreaMeasureProfile(n, cells, measures, cov, meta)


def fit_support_measures(K: ConvexBody, E: GaugeBody, grid: SpatialGrid,
                         cells: BoundaryCellComplex | None = None,
                         rho_nodes=None, delta: float | None = None,
                         N: int = 1_000_000, seed: int = 0, workers: int = 1,
                         tol: float = 1e-9, maxiter: int = 10000
                         ) -> SupportMeasureEstimate:
    """Same estimator as fit_area_measures, with samples classified by
    (spatial cell of the projection point) x (boundary cell of the relative
    normal direction)."""
    n = K.n
    if cells is None:
        cells = default_cells(n)
    if rho_nodes is None:
        rho_nodes = default_rho_nodes(K, 2 * n)
    coef, se, cov, meta = _fit_core(K, E, cells, grid, rho_nodes, delta, N,
                                    seed, workers, tol, maxiter)
    shape = (n, grid.m, cells.m)
    raw = coef.reshape(shape)
    se = se.reshape(shape)
    cov = cov.reshape((n, n) + shape[1:])
    zf = meta["z_fail"]
    clamped = raw < 0
    masses = np.where(clamped, 0.0, raw)
    for k in range(n):
        bad = raw[k] < -zf * se[k]
        if np.any(bad):
            raise NegativeMass(f"support measure order {k}: "
                               f"{int(bad.sum())} product cells below -z*sigma")
    return SupportMeasureEstimate(n, grid, cells, masses, se, raw, cov, meta)


@dataclass
class ProportionalityReport:
    k: int
    c: float
    max_dev: float
    max_excess: float        # max over cells of (|dev| - 3 sigma)+, normalized
    proportional: bool
    dev: np.ndarray
    sigma: np.ndarray
    tol: float

    @property
    def verdict(self) -> str:
        return "proportional" if self.proportional else "not proportional"


def proportionality_test(profile: AreaMeasureProfile, k: int,
                         tol: float = 0.05) -> ProportionalityReport:
    """Test S_k = c * S_{n-1} cell-by-cell.

    c is the ratio of totals; deviations are normalized by the mean cell
    mass total(S_{n-1}) / m; the verdict allows 3 sigma of fit noise on top
    of tol in every cell.
    """
    n = profile.n
    if not 0 <= k <= n - 2:
        raise InvalidSpec("k must satisfy 0 <= k <= n-2")
    top = profile.measures[n - 1]
    sk = profile.measures[k]
    sigma_total = float(np.sqrt(np.sum(top.stderr ** 2)))
    if top.total <= 3 * sigma_total:
        raise DegenerateProfile("S_{n-1} total is indistinguishable from 0")
    c = sk.total / top.total
    norm = top.total / profile.cells.m
    dev = (sk.masses - c * top.masses) / norm
    var = (profile.cov[k, k] + c * c * profile.cov[n - 1, n - 1]
           - 2 * c * profile.cov[k, n - 1])
    sigma = np.sqrt(np.maximum(var, 0.0)) / norm
    excess = np.maximum(np.abs(dev) - 3 * sigma, 0.0)
    return ProportionalityReport(k, float(c), float(np.abs(dev).max()),
                                 float(excess.max()),
                                 bool(excess.max() <= tol), dev, sigma,
                                 float(tol))
