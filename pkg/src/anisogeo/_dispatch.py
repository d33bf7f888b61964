"""Kernel selection: compiled extension when importable, numpy fallback else.

Set ANISOGEO_FORCE_PY=1 to force the fallback (used by the benchmark and the
equivalence tests). The active path never changes within a process, so runs
are reproducible per (package version, kernel path).
"""
from __future__ import annotations

import os

import numpy as np

from . import _kernels_py

FORCE_PY = os.environ.get("ANISOGEO_FORCE_PY", "") not in ("", "0")
try:
    from . import _kernels as _compiled  # type: ignore

    HAVE_COMPILED = True
except ImportError:
    _compiled = None
    HAVE_COMPILED = False

_COMPILED_BODIES = {"polytope", "ball", "ellipsoid", "hull_ball_pts"}
_COMPILED_GAUGES = {"ball", "ellipsoid", "lp"}


def kernel_name() -> str:
    return "compiled" if (HAVE_COMPILED and not FORCE_PY) else "python"


def edist_batch(body, gauge, X, tol: float = 1e-9, maxiter: int = 10000,
                scale: float = 1.0, force_py: bool = False,
                exit_levels=None, exit_cells=None):
    """Batched gauge distance over descriptors or python objects."""
    bd = body if isinstance(body, dict) else body.kernel_descriptor()
    gd = gauge if isinstance(gauge, dict) else gauge.kernel_descriptor()
    X = np.ascontiguousarray(np.asarray(X, dtype=float))
    if (HAVE_COMPILED and not FORCE_PY and not force_py
            and bd is not None and gd is not None
            and bd["kind"] in _COMPILED_BODIES and gd["kind"] in _COMPILED_GAUGES
            and X.shape[1] <= 8):
        return _compiled.edist_batch(bd, gd, X, tol, maxiter, scale,
                                     exit_levels, exit_cells)
    return _kernels_py.edist_batch(bd if bd is not None else body,
                                   gd if gd is not None else gauge,
                                   X, tol, maxiter, scale,
                                   exit_levels=exit_levels, exit_cells=exit_cells)
