from __future__ import annotations

import numpy as np
import pytest

from anisogeo.bodies import (Ball, EllipsoidBody, HullWithPoints,
                             MinkowskiCombination, SmoothBody, VPolytope,
                             body_from_json, make_tangential_body)
from anisogeo.errors import InvalidSpec
from anisogeo.gauges import BallGauge

SQUARE = VPolytope([[0, 0], [1, 0], [1, 1], [0, 1]])
CUBE = VPolytope([[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)])


def _dirs(n, count, seed):
    rng = np.random.default_rng(seed)
    U = rng.normal(size=(count, n))
    return U / np.linalg.norm(U, axis=1, keepdims=True)


def bodies():
    return [
        SQUARE,
        CUBE,
        Ball(np.array([0.5, -0.2]), 1.3),
        EllipsoidBody(np.diag([4.0, 1.0, 0.25]), [0.1, 0.0, -0.3]),
        HullWithPoints(Ball(np.zeros(3), 1.0), [[2.0, 0.0, 0.0]]),
        MinkowskiCombination([(1.0, SQUARE), (0.5, Ball(np.zeros(2), 1.0))]),
    ]


@pytest.mark.parametrize("K", bodies(), ids=lambda b: type(b).__name__)
def test_support_point_consistency(K):
    U = _dirs(K.n, 64, 1)
    h, pts = K.support_batch(U)
    assert np.allclose(np.einsum("ij,ij->i", pts, U), h, atol=1e-9)
    # support points belong to the body
    for p in pts[:16]:
        assert K.membership(p, tol=1e-7)


@pytest.mark.parametrize("K", bodies(), ids=lambda b: type(b).__name__)
def test_support_subadditive(K):
    U = _dirs(K.n, 32, 2)
    V = _dirs(K.n, 32, 3)
    hu = np.atleast_1d(K.h(U))
    hv = np.atleast_1d(K.h(V))
    huv = np.atleast_1d(K.h(U + V))
    assert np.all(huv <= hu + hv + 1e-9)


@pytest.mark.parametrize("K", bodies(), ids=lambda b: type(b).__name__)
def test_translate_support_shift(K):
    t = np.arange(1, K.n + 1, dtype=float) / 3.0
    Kt = K.translate(t)
    U = _dirs(K.n, 32, 4)
    assert np.allclose(np.atleast_1d(Kt.h(U)),
                       np.atleast_1d(K.h(U)) + U @ t, atol=1e-9)


def test_membership_square():
    assert SQUARE.membership([0.5, 0.5])
    assert SQUARE.membership([1.0, 1.0], tol=1e-9)
    assert not SQUARE.membership([1.1, 0.5])


def test_bounding_ball_contains_support_points():
    for K in bodies():
        c, r = K.bounding_ball()
        U = _dirs(K.n, 64, 5)
        _, pts = K.support_batch(U)
        assert np.all(np.linalg.norm(pts - c, axis=1) <= r + 1e-7)


def test_vpolytope_degenerate_still_answers():
    seg = VPolytope([[0, 0], [1, 0]])  # not full-dimensional: LP fallback
    assert seg.membership([0.5, 0.0])
    assert not seg.membership([0.5, 0.1])
    assert abs(float(np.atleast_1d(seg.h(np.array([1.0, 0.0])))[0]) - 1.0) < 1e-12
    with pytest.raises(InvalidSpec):
        VPolytope([[1.0, 2.0, 3.0]] * 0)


def test_body_json_roundtrip():
    for K in bodies():
        K2 = body_from_json(K.to_json())
        U = _dirs(K.n, 32, 6)
        assert np.allclose(np.atleast_1d(K.h(U)), np.atleast_1d(K2.h(U)),
                           atol=1e-12)


def test_tangential_constructions():
    E = BallGauge(1.0, 3)
    hom = make_tangential_body(E, {"kind": "homothet", "scale": 2.0})
    U = _dirs(3, 32, 7)
    assert np.allclose(np.atleast_1d(hom.h(U)), 2.0, atol=1e-12)

    cap = make_tangential_body(E, {"kind": "cap", "apexes": [[2.0, 0.0, 0.0]]})
    assert abs(float(np.atleast_1d(cap.h(np.array([1.0, 0, 0])))[0]) - 2.0) < 1e-12
    assert abs(float(np.atleast_1d(cap.h(np.array([-1.0, 0, 0])))[0]) - 1.0) < 1e-12

    circ = make_tangential_body(E, {"kind": "circumscribed",
                                    "directions": np.vstack([np.eye(3),
                                                             -np.eye(3)]).tolist()})
    assert circ.membership([1.0, 1.0, 1.0], tol=1e-6)  # cube vertex
    with pytest.raises(InvalidSpec):
        make_tangential_body(E, {"kind": "circumscribed",
                                 "directions": np.eye(3).tolist()})


def test_smooth_body_membership_via_gauge():
    E = BallGauge(1.0, 2)
    K = SmoothBody(2, h=E.h, grad_h=E.grad_h, gauge=E.gauge)
    assert K.membership([0.5, 0.5])
    assert not K.membership([1.0, 0.5])
