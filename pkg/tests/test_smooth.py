import numpy as np
import pytest
from scipy.special import ellipe

from anisogeo.bodies import Ball, EllipsoidBody, VPolytope
from anisogeo.cells import BoundaryCellComplex
from anisogeo.errors import NotSmooth
from anisogeo.gauges import BallGauge, EllipsoidGauge, LpBallGauge
from anisogeo.smooth import (charts, integrate_area_measures_smooth,
                             jacobian_expansion_check, rel_tensors,
                             relative_normalization, sk_values)

ELL3 = EllipsoidBody(np.diag([1.2, 1.0, 0.8]) ** 2)
LP3 = LpBallGauge(4.0, [1.0, 0.9, 0.8])


def _chart_points(n, count, seed):
    rng = np.random.default_rng(seed)
    return rng.uniform(-0.9, 0.9, size=(count, n - 1))


def test_normalization_contracts():
    for ch in charts(3):
        for z in _chart_points(3, 5, 0):
            xi, y = relative_normalization(ELL3, LP3, ch, z)
            assert abs(float(xi @ y) - 1.0) < 1e-12
            assert abs(float(LP3.gauge(y)) - 1.0) < 1e-9


def test_rel_tensors_contracts():
    worst = 0.0
    for ch in charts(3):
        for z in _chart_points(3, 4, 1):
            rs = rel_tensors(ELL3, LP3, ch, z)
            # normal direction annihilates both tangent frames
            assert np.max(np.abs(rs.xi @ rs.X)) < 1e-8
            assert np.max(np.abs(rs.xi @ rs.Y)) < 1e-8
            assert np.all(rs.radii > 0)
            assert rs.s[0] == 1.0
            worst = max(worst, rs.meta["rel_residual_31N"])
    assert worst < 1e-9


def test_rel_tensors_homothet_radii():
    # K = c E gives all relative radii equal to c and s_k = c^k
    E = LP3
    K = E.as_body().rescale(1.7)
    for ch in charts(3)[:2]:
        for z in _chart_points(3, 3, 2):
            rs = rel_tensors(K, E, ch, z)
            assert np.allclose(rs.radii, 1.7, rtol=1e-6)
            assert np.allclose(rs.s, 1.7 ** np.arange(3), rtol=1e-6)


def test_fd_fallback_matches_analytic():
    # SmoothBody hessians vs finite differences on the gradient
    ch = charts(3)[0]
    z = np.array([0.3, -0.4])
    a = rel_tensors(ELL3, LP3, ch, z, fd_step=None)
    b = rel_tensors(ELL3, LP3, ch, z, fd_step=1e-5)
    assert np.allclose(a.G, b.G, rtol=1e-7, atol=1e-9)
    assert np.allclose(a.radii, b.radii, rtol=1e-6)


def test_jacobian_expansion():
    worst = 0.0
    for ch in charts(3)[::2]:
        for z in _chart_points(3, 3, 3):
            worst = max(worst, jacobian_expansion_check(
                ELL3, LP3, ch, z, rho_list=[0.1, 0.5, 1.0, 2.0]))
    assert worst < 1e-8


def test_not_smooth_raises():
    square = VPolytope([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    ch = charts(2)[0]
    with pytest.raises(NotSmooth):
        rel_tensors(square, BallGauge(1.0, 2), ch, np.array([0.2]))


def test_sk_values_ball_pair():
    # K = R B^n vs unit ball: s_k = R^k everywhere
    K = Ball([0.0, 0.0, 0.0], 2.0)
    E = BallGauge(1.0, 3)
    rng = np.random.default_rng(4)
    U = rng.normal(size=(20, 3))
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    s = sk_values(K, E, U)
    assert np.allclose(s[0], 1.0, atol=1e-8)
    assert np.allclose(s[1], 2.0, atol=1e-6)
    assert np.allclose(s[2], 4.0, atol=1e-6)


def test_sk_values_bounded_near_flat_spot():
    # lp gauge, p = 4: D_E blows up along coordinate circles but the ratio
    # s_k stays bounded
    U = np.array([[1.0, t, t] for t in [1e-3, 1e-2, 0.1]])
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    s = sk_values(Ball([0.0, 0.0, 0.0], 1.0), LpBallGauge(4.0, [1, 1, 1]), U)
    assert np.all(np.isfinite(s))
    assert np.all(s > 0)
    assert np.all(s < 1e3)


def test_integrate_ball_exact():
    K = Ball([0.0, 0.0, 0.0], 1.5)
    E = BallGauge(1.0, 3)
    cells = BoundaryCellComplex.octahedral(1)
    prof = integrate_area_measures_smooth(K, E, cells=cells, quad_density=32)
    for k in range(3):
        assert np.allclose(prof.measures[k].masses, 1.5 ** k * cells.areas,
                           rtol=1e-5)


def test_integrate_circle_ellipse_perimeter():
    a, b = 1.3, 0.7
    K = EllipsoidBody(np.diag([a ** 2, b ** 2]))
    E = BallGauge(1.0, 2)
    cells = BoundaryCellComplex.circle(32)
    prof = integrate_area_measures_smooth(K, E, cells=cells, quad_density=64)
    per = 4 * a * ellipe(1 - (b / a) ** 2)
    assert abs(prof.measures[1].total - per) < 1e-6 * per
    assert abs(prof.measures[0].total - 2 * np.pi) < 1e-6


def test_integrate_mesh_vs_adaptive_2d():
    # lp gauge in the plane: the adaptive rule handles the 4 singular
    # points, the mesh backend must agree
    K = EllipsoidBody(np.diag([1.21, 0.81]))
    E = LpBallGauge(4.0, [1.0, 0.9])
    cells = BoundaryCellComplex.circle(16)
    pa = integrate_area_measures_smooth(K, E, cells=cells, quad_density=64,
                                        method="adaptive")
    pm = integrate_area_measures_smooth(K, E, cells=cells, quad_density=64,
                                        method="mesh")
    for k in range(2):
        scale = pa.measures[k].total / cells.m
        assert np.max(np.abs(pa.measures[k].masses - pm.measures[k].masses)) \
            < 4e-3 * scale


def test_integrate_method_auto_selects_mesh_for_lp():
    cells = BoundaryCellComplex.octahedral(1)
    prof = integrate_area_measures_smooth(ELL3, LP3, cells=cells,
                                          quad_density=16)
    assert prof.meta["method"] == "mesh"
    prof2 = integrate_area_measures_smooth(ELL3, BallGauge(1.0, 3),
                                           cells=cells, quad_density=16)
    assert prof2.meta["method"] == "adaptive"


def test_integrate_totals_match_steiner_fit():
    # weighted totals reproduce intrinsic volumes of the ellipsoid:
    # (1/n) sum_c h_E(u_c) S_{n-1}(c) = V(K) for E = B^3
    from anisogeo.mixed import steiner_fit
    E = BallGauge(1.0, 3)
    cells = BoundaryCellComplex.octahedral(3)
    prof = integrate_area_measures_smooth(ELL3, E, cells=cells,
                                          quad_density=32)
    tab = steiner_fit(ELL3, E, N=2_000_000, seed=5)
    hE = np.ones(cells.m)
    for k in range(3):
        # V_k = (1/n) integral h_E dS_k, and h_E = 1 here
        v, _ = prof.weighted_total(k, hE)
        assert abs(v / 3.0 - tab.V[k]) <= max(
            4 * tab.stderr[k], 0.02 * tab.V[k])
