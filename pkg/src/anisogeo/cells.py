"""Cell complexes on the unit sphere of directions, plus spatial box grids.

n = 2: equal arcs with edges offset half a cell, so the axis directions
(normals of axis-aligned polytopes) sit at cell centers, not on edges.
n = 3: recursive geodesic subdivision of the octahedron (8 * 4^level
spherical triangles). Both families are nested under refinement, so masses
binned on a finer complex aggregate exactly to the coarser one.
"""
from __future__ import annotations

import numpy as np

from .errors import InvalidSpec


def _spherical_triangle_area(A, B, C) -> np.ndarray:
    """L'Huilier's formula, batched over leading axes."""
    a = np.arccos(np.clip(np.einsum("...i,...i->...", B, C), -1.0, 1.0))
    b = np.arccos(np.clip(np.einsum("...i,...i->...", A, C), -1.0, 1.0))
    c = np.arccos(np.clip(np.einsum("...i,...i->...", A, B), -1.0, 1.0))
    s = 0.5 * (a + b + c)
    t = np.tan(s / 2) * np.tan((s - a) / 2) * np.tan((s - b) / 2) * np.tan((s - c) / 2)
    return 4.0 * np.arctan(np.sqrt(np.maximum(t, 0.0)))


class BoundaryCellComplex:
    """Partition of S^{n-1} into cells with representatives and areas."""

    def __init__(self, n: int, reps: np.ndarray, areas: np.ndarray, kind: str,
                 meta: dict):
        self.n = n
        self.reps = reps
        self.areas = areas
        self.kind = kind
        self.meta = meta

    @property
    def m(self) -> int:
        return self.reps.shape[0]

    # ------------------------------------------------------------------ n=2
    @staticmethod
    def circle(m: int = 256, offset: float | None = None) -> "BoundaryCellComplex":
        """m equal arcs; cell k covers [offset + k*w, offset + (k+1)*w).

        Default offset -w/2 puts the coordinate axes at cell centers.
        """
        if m < 4:
            raise InvalidSpec("need at least 4 arcs")
        width = 2 * np.pi / m
        if offset is None:
            offset = -width / 2
        ang = offset + (np.arange(m) + 0.5) * width
        reps = np.stack([np.cos(ang), np.sin(ang)], axis=1)
        areas = np.full(m, width)
        return BoundaryCellComplex(2, reps, areas, "circle",
                                   {"m": m, "width": width, "offset": offset})

    # ------------------------------------------------------------------ n=3
    @staticmethod
    def octahedral(level: int = 3) -> "BoundaryCellComplex":
        """8 * 4^level nested spherical triangles."""
        if level < 0 or level > 8:
            raise InvalidSpec("octahedral level must be in 0..8")
        tris = []
        for b2 in (1.0, -1.0):
            for b1 in (1.0, -1.0):
                for b0 in (1.0, -1.0):
                    # octant index bits: b0 ~ x sign, b1 ~ y, b2 ~ z
                    A = np.array([b0, 0.0, 0.0])
                    B = np.array([0.0, b1, 0.0])
                    C = np.array([0.0, 0.0, b2])
                    tris.append((A, B, C))
        # reorder so octant id = (x<0) + 2*(y<0) + 4*(z<0)
        orderd = []
        for oid in range(8):
            sx = -1.0 if oid & 1 else 1.0
            sy = -1.0 if oid & 2 else 1.0
            sz = -1.0 if oid & 4 else 1.0
            orderd.append((np.array([sx, 0.0, 0.0]), np.array([0.0, sy, 0.0]),
                           np.array([0.0, 0.0, sz])))
        tris = orderd
        for _ in range(level):
            new = []
            for (A, B, C) in tris:
                Mab = _mid(A, B)
                Mbc = _mid(B, C)
                Mca = _mid(C, A)
                new.extend([(A, Mab, Mca), (Mab, B, Mbc), (Mca, Mbc, C),
                            (Mab, Mbc, Mca)])
            tris = new
        corners = np.array(tris)  # (m, 3, 3)
        cents = corners.sum(axis=1)
        reps = cents / np.linalg.norm(cents, axis=1, keepdims=True)
        areas = _spherical_triangle_area(corners[:, 0], corners[:, 1], corners[:, 2])
        return BoundaryCellComplex(3, reps, areas, "octahedral",
                                   {"level": level, "corners": corners})

    # ----------------------------------------------------------------- locate
    def locate(self, U) -> np.ndarray:
        """Cell index of each unit direction (deterministic tie-breaks)."""
        U = np.atleast_2d(np.asarray(U, dtype=float))
        if self.kind == "circle":
            width = self.meta["width"]
            off = self.meta["offset"]
            th = np.arctan2(U[:, 1], U[:, 0])
            k = np.floor((th - off) / width).astype(np.int64)
            return k % self.m
        return _octa_locate(U, self.meta["level"])

    # ----------------------------------------------------------- refinement
    def refine(self) -> "BoundaryCellComplex":
        """Nested refinement: every fine cell lies inside one coarse cell."""
        if self.kind == "circle":
            # keep the absolute offset so coarse edges stay edges
            return BoundaryCellComplex.circle(2 * self.m, self.meta["offset"])
        return BoundaryCellComplex.octahedral(self.meta["level"] + 1)

    def parent_of(self, finer: "BoundaryCellComplex") -> np.ndarray:
        """index map: cell of `finer` -> containing cell of self."""
        if finer.kind != self.kind:
            raise InvalidSpec("complexes must be of the same family")
        if self.kind == "circle":
            ratio = finer.m // self.m
            if (finer.m != self.m * ratio or ratio < 1
                    or finer.meta["offset"] != self.meta["offset"]):
                raise InvalidSpec("finer complex must refine this one")
            k = np.arange(finer.m)
            return np.floor((k + 0.5) / ratio).astype(np.int64)
        dl = finer.meta["level"] - self.meta["level"]
        if dl < 0:
            raise InvalidSpec("finer complex must refine this one")
        return np.arange(finer.m, dtype=np.int64) >> np.int64(2 * dl)

    def cell_corners(self, i: int) -> np.ndarray:
        """Spherical triangle corners (n=3) or arc endpoint angles (n=2)."""
        if self.kind == "circle":
            width = self.meta["width"]
            off = self.meta["offset"]
            return np.array([off + i * width, off + (i + 1) * width])
        return self.meta["corners"][i]


def _mid(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    m = a + b
    return m / np.linalg.norm(m)


def _octa_locate(U: np.ndarray, level: int) -> np.ndarray:
    m = U.shape[0]
    # octant by signs; boundary points (zero coords) go to the nonnegative
    # side, matching the corner-first child tests below
    neg = U < 0.0
    oct_id = (neg[:, 0].astype(np.int64) + 2 * neg[:, 1].astype(np.int64)
              + 4 * neg[:, 2].astype(np.int64))
    sx = np.where(neg[:, 0], -1.0, 1.0)
    sy = np.where(neg[:, 1], -1.0, 1.0)
    sz = np.where(neg[:, 2], -1.0, 1.0)
    z = np.zeros(m)
    A = np.stack([sx, z, z], axis=1)
    B = np.stack([z, sy, z], axis=1)
    C = np.stack([z, z, sz], axis=1)
    idx = oct_id
    for _ in range(level):
        Mab = A + B
        Mab /= np.linalg.norm(Mab, axis=1, keepdims=True)
        Mbc = B + C
        Mbc /= np.linalg.norm(Mbc, axis=1, keepdims=True)
        Mca = C + A
        Mca /= np.linalg.norm(Mca, axis=1, keepdims=True)
        # child 0 (corner A): same side of the great circle (Mab, Mca) as A
        det_u = _det3(U, Mab, Mca)
        det_a = _det3(A, Mab, Mca)
        in0 = det_u * det_a > 0.0
        det_u = _det3(U, Mbc, Mab)
        det_b = _det3(B, Mbc, Mab)
        in1 = ~in0 & (det_u * det_b > 0.0)
        det_u = _det3(U, Mca, Mbc)
        det_c = _det3(C, Mca, Mbc)
        in2 = ~in0 & ~in1 & (det_u * det_c > 0.0)
        child = np.where(in0, 0, np.where(in1, 1, np.where(in2, 2, 3)))
        idx = 4 * idx + child
        A2 = np.where(in0[:, None], A, np.where(in1[:, None], Mab,
                      np.where(in2[:, None], Mca, Mab)))
        B2 = np.where(in0[:, None], Mab, np.where(in1[:, None], B,
                      np.where(in2[:, None], Mbc, Mbc)))
        C2 = np.where(in0[:, None], Mca, np.where(in1[:, None], Mbc,
                      np.where(in2[:, None], C, Mca)))
        A, B, C = A2, B2, C2
    return idx


def _det3(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    return np.einsum("ij,ij->i", a, np.cross(b, c))


class SpatialGrid:
    """Axis-aligned box grid for spatial localization of boundary mass."""

    def __init__(self, lo, hi, shape):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        self.shape = tuple(int(s) for s in np.broadcast_to(shape, self.lo.shape))
        if np.any(self.hi <= self.lo):
            raise InvalidSpec("grid box must have positive extent")
        self.n = self.lo.size

    @property
    def m(self) -> int:
        return int(np.prod(self.shape))

    def locate(self, P) -> np.ndarray:
        P = np.atleast_2d(np.asarray(P, dtype=float))
        rel = (P - self.lo) / (self.hi - self.lo)
        ids = np.clip((rel * np.array(self.shape)).astype(np.int64), 0,
                      np.array(self.shape) - 1)
        return np.ravel_multi_index(ids.T, self.shape)

    def centers(self) -> np.ndarray:
        axes = [self.lo[i] + (np.arange(s) + 0.5) * (self.hi[i] - self.lo[i]) / s
                for i, s in enumerate(self.shape)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in mesh], axis=1)
