import numpy as np
import pytest

from anisogeo.bodies import Ball, VPolytope
from anisogeo.cells import BoundaryCellComplex, SpatialGrid
from anisogeo.errors import NegativeMass
from anisogeo.gauges import BallGauge
from anisogeo.measures import (CellMeasure, curvature_measures,
                               estimate_boundary_density, fit_area_measures,
                               fit_support_measures, proportionality_test)
from anisogeo.metric import sample_box
from anisogeo.oracles import polygon_ball_area_profile

SQ_VERTS = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
SQUARE = VPolytope(SQ_VERTS)
DISC = BallGauge(1.0, 2)


@pytest.fixture(scope="module")
def square_profile():
    cells = BoundaryCellComplex.circle(64)
    return fit_area_measures(SQUARE, DISC, cells=cells, N=400_000, seed=3)


def test_square_disc_vs_exact(square_profile):
    prof = square_profile
    exact = polygon_ball_area_profile(SQ_VERTS, prof.cells)
    for k in (0, 1):
        m = prof.measures[k]
        err = np.abs(m.masses - exact[k])
        assert np.all(err <= 0.02 * max(exact[k].sum(), 1.0) / prof.cells.m
                      + 4 * m.stderr)
        assert abs(m.total - exact[k].sum()) < 0.02 * exact[k].sum()


def test_square_s1_atoms_localized(square_profile):
    # edge-normal atoms: all S_1 mass concentrates in the four axis cells
    m = square_profile.measures[1]
    atom_cells = square_profile.cells.locate(np.array(
        [[1.0, 0], [0, 1], [-1.0, 0], [0, -1.0]]))
    frac = m.masses[atom_cells].sum() / m.total
    assert frac > 0.95


def test_translation_invariance():
    cells = BoundaryCellComplex.circle(32)
    a = fit_area_measures(SQUARE, DISC, cells=cells, N=200_000, seed=5)
    b = fit_area_measures(SQUARE.translate([3.0, -2.0]), DISC, cells=cells,
                          N=200_000, seed=5)
    for k in (0, 1):
        sig = np.hypot(a.measures[k].stderr, b.measures[k].stderr)
        assert np.all(np.abs(a.measures[k].masses - b.measures[k].masses)
                      <= 4 * sig + 1e-12)


def test_refinement_aggregation():
    coarse = BoundaryCellComplex.circle(16)
    fine = coarse.refine()
    prof = fit_area_measures(SQUARE, DISC, cells=fine, N=200_000, seed=1)
    parents = coarse.parent_of(fine)
    for k in (0, 1):
        agg = np.bincount(parents, weights=prof.measures[k].masses,
                          minlength=coarse.m)
        exact = polygon_ball_area_profile(SQ_VERTS, coarse)[k]
        assert np.all(np.abs(agg - exact) < 0.05 * max(exact.sum(), 1.0))


def test_proportionality_positive_and_negative():
    # ball: S_0 proportional to S_1; square: S_0 is not
    cells = BoundaryCellComplex.circle(32)
    ballp = fit_area_measures(Ball([0.0, 0.0], 1.0), DISC, cells=cells,
                              N=400_000, seed=2)
    rep = proportionality_test(ballp, 0)
    assert rep.verdict == "proportional"
    assert abs(rep.c - 1.0) < 0.05

    sqp = fit_area_measures(SQUARE, DISC, cells=cells, N=400_000, seed=2)
    rep2 = proportionality_test(sqp, 0)
    assert rep2.verdict == "not proportional"
    assert rep2.max_excess > 10 * rep2.tol


def test_cell_measure_clamp_and_failure():
    raw = np.array([1.0, -0.001, 0.5])
    se = np.array([0.01, 0.01, 0.01])
    cm = CellMeasure.from_raw(raw, se, z_fail=4.0)
    assert cm.masses[1] == 0.0
    assert cm.clamped[1]
    assert cm.raw_masses[1] == -0.001
    with pytest.raises(NegativeMass):
        CellMeasure.from_raw(np.array([1.0, -0.1, 0.5]), se, z_fail=4.0)


def test_support_measures_marginalize_to_area_profile():
    cells = BoundaryCellComplex.circle(32)
    lo, hi = sample_box(SQUARE, DISC, 1.0)
    grid = SpatialGrid(lo - 0.1, hi + 0.1, (3, 3))
    est = fit_support_measures(SQUARE, DISC, grid, cells=cells,
                               N=300_000, seed=4)
    marg = est.area_profile()
    direct = fit_area_measures(SQUARE, DISC, cells=cells, N=300_000, seed=4)
    for k in (0, 1):
        # same draws, same windows: identical up to binning roundoff
        assert np.allclose(marg.measures[k].raw_masses,
                           direct.measures[k].raw_masses, atol=1e-9)


def test_curvature_measures_localize():
    # spatial marginal of Theta_1 for the square: perimeter mass on edges
    cells = BoundaryCellComplex.circle(32)
    grid = SpatialGrid([-0.5, -0.5], [1.5, 1.5], (2, 2))
    est = fit_support_measures(SQUARE, DISC, grid, cells=cells,
                               N=300_000, seed=6)
    cur = curvature_measures(est)
    assert abs(cur[1].total - 4.0) < 0.1
    # four-fold symmetry of the square splits mass evenly
    assert np.allclose(cur[1].masses, 1.0, atol=0.1)


def test_estimate_boundary_density_matches_parallel_perimeter():
    from anisogeo.oracles import planar_parallel_perimeter
    rho, delta = 0.5, 0.05
    cells = BoundaryCellComplex.circle(16)
    dens = estimate_boundary_density(SQUARE, DISC, rho=rho, delta=delta,
                                     cells=cells, N=400_000, seed=8)
    total = dens.masses.sum()
    # window average of the parallel perimeter over [rho-delta/2, rho+delta/2]
    lo, hi = rho - delta / 2, rho + delta / 2
    ref = (planar_parallel_perimeter(SQ_VERTS, lo)
           + planar_parallel_perimeter(SQ_VERTS, hi)) / 2
    assert abs(total - ref) < 0.02 * ref


def test_fit_worker_invariance():
    cells = BoundaryCellComplex.circle(16)
    a = fit_area_measures(SQUARE, DISC, cells=cells, N=150_000, seed=9,
                          workers=1)
    b = fit_area_measures(SQUARE, DISC, cells=cells, N=150_000, seed=9,
                          workers=3)
    for k in (0, 1):
        assert np.array_equal(a.measures[k].raw_masses,
                              b.measures[k].raw_masses)
