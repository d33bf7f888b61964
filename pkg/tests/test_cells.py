from __future__ import annotations

import numpy as np
import pytest

from anisogeo.cells import BoundaryCellComplex, SpatialGrid
from anisogeo.errors import InvalidSpec


def _dirs(n, count, seed):
    rng = np.random.default_rng(seed)
    U = rng.normal(size=(count, n))
    return U / np.linalg.norm(U, axis=1, keepdims=True)


@pytest.mark.parametrize("cells", [BoundaryCellComplex.circle(64),
                                   BoundaryCellComplex.circle(256),
                                   BoundaryCellComplex.octahedral(2),
                                   BoundaryCellComplex.octahedral(3)],
                         ids=["circle64", "circle256", "octa2", "octa3"])
def test_partition_of_sphere(cells):
    n = cells.n
    sphere = 2 * np.pi if n == 2 else 4 * np.pi
    assert abs(cells.areas.sum() - sphere) < 1e-12 * sphere
    U = _dirs(n, 20000, 1)
    ids = cells.locate(U)
    assert ids.min() >= 0 and ids.max() < cells.m
    # every cell hit at least once at this sampling density
    assert np.unique(ids).size == cells.m


@pytest.mark.parametrize("cells", [BoundaryCellComplex.circle(64),
                                   BoundaryCellComplex.octahedral(2)],
                         ids=["circle", "octa"])
def test_reps_locate_into_their_own_cells(cells):
    ids = cells.locate(cells.reps)
    assert np.array_equal(ids, np.arange(cells.m))


@pytest.mark.parametrize("cells", [BoundaryCellComplex.circle(32),
                                   BoundaryCellComplex.octahedral(1)],
                         ids=["circle", "octa"])
def test_refine_parent_consistency(cells):
    fine = cells.refine()
    assert fine.m > cells.m
    parent = cells.parent_of(fine)
    U = _dirs(cells.n, 50000, 2)
    coarse_ids = cells.locate(U)
    fine_ids = fine.locate(U)
    assert np.array_equal(parent[fine_ids], coarse_ids)
    # refined areas aggregate exactly
    agg = np.zeros(cells.m)
    np.add.at(agg, parent, fine.areas)
    assert np.allclose(agg, cells.areas, rtol=1e-12)


def test_circle_axis_directions_at_cell_centers():
    cells = BoundaryCellComplex.circle(256)
    axes = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
    ids = cells.locate(axes)
    assert list(ids) == [0, 64, 128, 192]
    # axis directions sit at the middle of their cells
    reps = cells.reps[ids]
    assert np.allclose(reps, axes, atol=1e-12)


def test_octahedral_locate_octants():
    cells = BoundaryCellComplex.octahedral(0)
    assert cells.m == 8
    U = _dirs(3, 1000, 3)
    ids = cells.locate(U)
    expect = ((U[:, 0] < 0).astype(int) + 2 * (U[:, 1] < 0)
              + 4 * (U[:, 2] < 0))
    assert np.array_equal(ids, expect)


def test_spatial_grid_roundtrip():
    grid = SpatialGrid([-1.0, 0.0], [1.0, 2.0], (4, 8))
    assert grid.m == 32
    c = grid.centers()
    assert np.array_equal(grid.locate(c), np.arange(32))
    # out-of-box points clip to edge cells
    assert grid.locate(np.array([[5.0, 5.0]]))[0] == 31


def test_invalid_cells():
    with pytest.raises(InvalidSpec):
        BoundaryCellComplex.circle(0)
    with pytest.raises(InvalidSpec):
        BoundaryCellComplex.octahedral(-1)
