from __future__ import annotations

import numpy as np
import pytest

from anisogeo.errors import InvalidSpec
from anisogeo.gauges import (BallGauge, EllipsoidGauge, LpBallGauge,
                             SmoothedPolytopeGauge, gauge_from_json)

GAUGES = [
    BallGauge(1.0, 2),
    BallGauge(2.5, 3),
    EllipsoidGauge([[4.0, 0.3], [0.3, 1.0]]),
    EllipsoidGauge(np.diag([1.0, 0.64, 0.36])),
    LpBallGauge(4.0, [1.0, 1.0]),
    LpBallGauge(4.0, [1.0, 0.9, 0.8]),
    LpBallGauge(1.5, [1.0, 2.0]),
    SmoothedPolytopeGauge([[1, 0], [0, 1], [-1, 0], [0, -1]], 0.2),
]


def _dirs(n, count, seed):
    rng = np.random.default_rng(seed)
    U = rng.normal(size=(count, n))
    return U / np.linalg.norm(U, axis=1, keepdims=True)


@pytest.mark.parametrize("E", GAUGES, ids=lambda g: type(g).__name__ + str(g.n))
def test_support_gauge_duality(E):
    U = _dirs(E.n, 64, 1)
    h = np.atleast_1d(E.h(U))
    X = np.atleast_2d(E.grad_h(U))
    # boundary point with normal u: <x,u> = h(u) and g(x) = 1
    assert np.allclose(np.einsum("ij,ij->i", X, U), h, atol=1e-10)
    assert np.allclose(np.atleast_1d(E.gauge(X)), 1.0, atol=1e-9)


@pytest.mark.parametrize("E", GAUGES, ids=lambda g: type(g).__name__ + str(g.n))
def test_homogeneity(E):
    U = _dirs(E.n, 32, 2)
    lam = 3.7
    assert np.allclose(np.atleast_1d(E.h(lam * U)),
                       lam * np.atleast_1d(E.h(U)), rtol=1e-12)
    assert np.allclose(np.atleast_1d(E.gauge(lam * U)),
                       lam * np.atleast_1d(E.gauge(U)), rtol=1e-12)
    # gradients are 0-homogeneous
    assert np.allclose(np.atleast_2d(E.grad_h(lam * U)),
                       np.atleast_2d(E.grad_h(U)), atol=1e-12)


@pytest.mark.parametrize("E", GAUGES, ids=lambda g: type(g).__name__ + str(g.n))
def test_grad_h_finite_difference(E):
    U = _dirs(E.n, 16, 3)
    G = np.atleast_2d(E.grad_h(U))
    eps = 1e-6
    for j in range(E.n):
        e = np.zeros(E.n)
        e[j] = eps
        fd = (np.atleast_1d(E.h(U + e)) - np.atleast_1d(E.h(U - e))) / (2 * eps)
        assert np.max(np.abs(G[:, j] - fd)) < 1e-6


@pytest.mark.parametrize("E", GAUGES, ids=lambda g: type(g).__name__ + str(g.n))
def test_gauge_triangle_inequality(E):
    rng = np.random.default_rng(4)
    for _ in range(50):
        a = rng.normal(size=E.n)
        b = rng.normal(size=E.n)
        ga = float(np.atleast_1d(E.gauge(a))[0])
        gb = float(np.atleast_1d(E.gauge(b))[0])
        gab = float(np.atleast_1d(E.gauge(a + b))[0])
        assert gab <= ga + gb + 1e-9


@pytest.mark.parametrize("E", GAUGES, ids=lambda g: type(g).__name__ + str(g.n))
def test_radii_bounds(E):
    U = _dirs(E.n, 256, 5)
    h = np.atleast_1d(E.h(U))
    assert np.all(h >= E.inradius() - 1e-9)
    assert np.all(h <= E.outradius() + 1e-9)


def test_lp4_gauge_value():
    E = LpBallGauge(4.0, [1.0, 1.0])
    g = float(np.atleast_1d(E.gauge(np.array([1.0, 1.0])))[0])
    assert abs(g - 2.0 ** 0.25) < 1e-12
    # bisection on membership: smallest s with (1,1)/s inside E
    lo, hi = 1.0, 2.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if np.sum(np.abs(np.array([1.0, 1.0]) / mid) ** 4) <= 1.0:
            hi = mid
        else:
            lo = mid
    assert abs(g - hi) < 1e-9


def test_ellipsoid_axis_boundary():
    E = EllipsoidGauge(np.diag([4.0, 1.0]))
    assert abs(float(np.atleast_1d(E.gauge(np.array([2.0, 0.0])))[0]) - 1.0) < 1e-12


def test_roundtrip_gauss_map():
    for E in GAUGES:
        U = _dirs(E.n, 64, 6)
        X = np.atleast_2d(E.grad_h(U))
        V = np.atleast_2d(E._normal_at(X))
        V = V / np.linalg.norm(V, axis=1, keepdims=True)
        assert np.max(np.abs(V - U)) < 1e-8


def test_gauge_from_json_roundtrip():
    for E in GAUGES:
        E2 = gauge_from_json(E.to_json())
        U = _dirs(E.n, 16, 7)
        assert np.allclose(np.atleast_1d(E.h(U)), np.atleast_1d(E2.h(U)),
                           rtol=1e-12)


def test_invalid_gauges_rejected():
    with pytest.raises(InvalidSpec):
        BallGauge(-1.0, 2)
    with pytest.raises(InvalidSpec):
        LpBallGauge(1.0, [1.0, 1.0])
    with pytest.raises(InvalidSpec):
        EllipsoidGauge([[1.0, 0.0], [0.0, -2.0]])
    with pytest.raises(InvalidSpec):
        gauge_from_json({"type": "unknown"})
