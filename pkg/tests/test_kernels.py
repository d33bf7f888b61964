import numpy as np
import pytest

from anisogeo import _dispatch
from anisogeo._kernels_py import cap_distance_2d, edist_batch as edist_py
from anisogeo.bodies import (Ball, EllipsoidBody, HullWithPoints, VPolytope,
                             make_tangential_body)
from anisogeo.gauges import BallGauge, EllipsoidGauge, LpBallGauge
from anisogeo.oracles import cap_body_distance, exact_polygon_distance

pytestmark = pytest.mark.skipif(not _dispatch.HAVE_COMPILED,
                                reason="compiled kernels unavailable")

SQUARE = VPolytope([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
CUBE = VPolytope([[i, j, k] for i in (0, 1) for j in (0, 1) for k in (0, 1)])

PAIRS = [
    (SQUARE, BallGauge(1.0, 2)),
    (SQUARE, EllipsoidGauge([[2.0, 0.3], [0.3, 1.0]])),
    (SQUARE, LpBallGauge(4.0, [1.0, 0.7])),
    (CUBE, LpBallGauge(1.5, [1.0, 1.0, 0.5])),
    (Ball([0.5, 0.0, 0.0], 1.0), EllipsoidGauge(np.diag([1.0, 2.0, 3.0]))),
    (EllipsoidBody(np.diag([1.44, 1.0, 0.64])), LpBallGauge(4.0, [1, 1, 1])),
    (make_tangential_body(BallGauge(1.0, 3), {"kind": "cap", "apexes": [[2.0, 0.0, 0.0]]}), BallGauge(1.0, 3)),
]


@pytest.mark.parametrize("K,E", PAIRS, ids=lambda o: type(o).__name__)
def test_compiled_matches_python(K, E):
    rng = np.random.default_rng(11)
    X = rng.uniform(-2.0, 3.0, size=(300, K.n))
    oc = _dispatch.edist_batch(K, E, X, tol=1e-9)
    op = _dispatch.edist_batch(K, E, X, tol=1e-9, force_py=True)
    # flat lp-gauge spots can stall just above tol; the gap still certifies
    for out in (oc, op):
        assert np.all(out["gap"] <= 1e-7)
        assert out["conv"].mean() > 0.9
    # both are upper bounds within their gaps of the same optimum
    slack = oc["gap"] + op["gap"] + 1e-9
    assert np.all(np.abs(oc["d"] - op["d"]) <= slack)
    # feasibility of the reported nearest points
    for out in (oc, op):
        gP = E.gauge(X - out["P"])
        assert np.all(gP <= out["d"] + 1e-7)


def test_force_py_env_and_kwarg_agree():
    X = np.random.default_rng(0).uniform(-2, 2, size=(50, 2))
    a = _dispatch.edist_batch(SQUARE, BallGauge(1.0, 2), X, force_py=True)
    b = edist_py(SQUARE.kernel_descriptor(),
                 BallGauge(1.0, 2).kernel_descriptor(), X, 1e-9, 10000, None)
    assert np.array_equal(a["d"], b["d"])
    assert np.array_equal(a["P"], b["P"])


def test_closed_form_ball_ball():
    K = Ball([1.0, 2.0, 3.0], 0.5)
    E = BallGauge(2.0, 3)
    rng = np.random.default_rng(5)
    X = rng.normal(size=(100, 3)) * 3
    out = _dispatch.edist_batch(K, E, X, force_py=True)
    ref = np.maximum(np.linalg.norm(X - np.array([1.0, 2, 3]), axis=1) - 0.5, 0) / 2.0
    assert np.allclose(out["d"], ref, atol=1e-12)
    assert np.all(out["iters"] == 0)


def test_closed_form_cap_ball_matches_oracle():
    L = 2.5
    K = make_tangential_body(BallGauge(1.0, 3), {"kind": "cap", "apexes": [[L, 0.0, 0.0]]})
    E = BallGauge(1.0, 3)
    rng = np.random.default_rng(6)
    X = rng.uniform([-2, -2, -2], [4, 2, 2], size=(400, 3))
    out = _dispatch.edist_batch(K, E, X, force_py=True)
    ref = np.array([cap_body_distance(x, L) for x in X])
    assert np.allclose(out["d"], ref, atol=1e-10)


def test_cap_distance_2d_spot():
    # behind the disc and beyond the apex
    assert abs(cap_distance_2d(-3.0, 0.0, 1.0, 2.0) - 2.0) < 1e-12
    assert abs(cap_distance_2d(3.0, 0.0, 1.0, 2.0) - 1.0) < 1e-12
    assert cap_distance_2d(0.3, 0.2, 1.0, 2.0) == 0.0


def test_polytope_distance_euclidean_reference():
    rng = np.random.default_rng(7)
    verts = rng.uniform(-1, 1, size=(7, 2))
    K = VPolytope(verts)
    E = BallGauge(1.0, 2)
    X = rng.uniform(-2, 2, size=(200, 2))
    for force in (False, True):
        out = _dispatch.edist_batch(K, E, X, tol=1e-10, force_py=force)
        ref = np.array([exact_polygon_distance(verts, x) for x in X])
        assert np.max(np.abs(out["d"] - ref)) < 1e-8


def test_certificate_exit_classification():
    rng = np.random.default_rng(8)
    K = CUBE
    E = LpBallGauge(4.0, [1.0, 1.0, 1.0])
    X = rng.uniform(-1.5, 2.5, size=(500, 3))
    levels = np.array([0.4, 0.9])
    full = _dispatch.edist_batch(K, E, X, tol=1e-10)
    keep = np.min(np.abs(full["d"][:, None] - levels[None, :]), axis=1) > 1e-6
    for force in (False, True):
        cert = _dispatch.edist_batch(K, E, X, tol=1e-10, force_py=force,
                                     exit_levels=levels,
                                     exit_cells=np.array([True, True, True]))
        ca = np.searchsorted(levels, cert["d"][keep])
        cb = np.searchsorted(levels, full["d"][keep])
        assert np.array_equal(ca, cb)
        assert cert["iters"].sum() <= full["iters"].sum()


def test_certificate_false_cells_fully_converge():
    K = SQUARE
    E = BallGauge(1.0, 2)
    rng = np.random.default_rng(9)
    X = rng.uniform(-1, 2, size=(200, 2))
    levels = np.array([0.5])
    out = _dispatch.edist_batch(K, E, X, tol=1e-10, force_py=True,
                                exit_levels=levels,
                                exit_cells=np.array([False, False]))
    ref = np.array([exact_polygon_distance(SQUARE.vertices, x) for x in X])
    assert np.max(np.abs(out["d"] - ref)) < 1e-8
    assert np.all(out["gap"] <= 1e-9 + 1e-12)


def test_hull_ball_pts_descriptor_roundtrip():
    K = HullWithPoints(Ball([0.0, 0.0], 1.0), [[2.0, 0.0], [0.0, 2.0]])
    desc = K.kernel_descriptor()
    assert desc["kind"] == "hull_ball_pts"
    X = np.random.default_rng(10).uniform(-2, 3, size=(100, 2))
    oc = _dispatch.edist_batch(K, BallGauge(1.0, 2), X)
    op = _dispatch.edist_batch(K, BallGauge(1.0, 2), X, force_py=True)
    assert np.all(np.abs(oc["d"] - op["d"]) <= oc["gap"] + op["gap"] + 1e-9)


def test_unsupported_combo_falls_back():
    # smoothed polytope gauges have no compiled path; dispatch must not crash
    from anisogeo.gauges import SmoothedPolytopeGauge
    E = SmoothedPolytopeGauge(np.array([[1.0, 0], [0, 1], [-1, 0], [0, -1]]), 0.2)
    X = np.random.default_rng(12).uniform(-2, 2, size=(20, 2))
    out = _dispatch.edist_batch(SQUARE, E, X)
    assert out["conv"].all()
