import numpy as np
import pytest

from pvot.errors import GridTooCoarse
from pvot.grid import NuisanceGrid, make_grid, make_grid_points


def test_counted_grid_is_robust_to_float_rounding():
    # 0.98 * 250 is 244.99999999999997 in doubles; the cell count must
    # still come out as 245 with the last point landing on the upper end.
    grid = make_grid(0.01, 0.99, 1.0, 250)
    assert len(grid) == 245
    assert grid.points[-1] == pytest.approx(0.99, abs=1e-12)
    assert grid.cell_measure == pytest.approx(1.0 / 245)


def test_fine_grid_reaches_upper_endpoint():
    grid = make_grid(0.0001, 1.0, 100.0, 100)
    assert len(grid) == 9999
    assert grid.points[0] == pytest.approx(0.0002)
    assert grid.points[-1] == pytest.approx(1.0)


def test_grid_spacing_matches_density():
    grid = make_grid(0.0001, 1.0, 10.0, 250)
    steps = np.diff(grid.points)
    assert np.allclose(steps, 1.0 / (10.0 * 250))


def test_too_coarse_grid_raises():
    with pytest.raises(GridTooCoarse):
        make_grid(0.0, 1.0, 0.001, 1)


def test_fixed_count_grid():
    grid = make_grid_points(0.0, 1.0, 1000)
    assert len(grid) == 1000
    assert grid.points[0] == pytest.approx(0.001)
    assert grid.points[-1] == 1.0
    assert 0.0 not in grid.points


def test_fixed_count_grid_on_interior_interval():
    grid = make_grid_points(0.01, 0.99, 50)
    assert len(grid) == 50
    assert grid.points[-1] == 0.99
    assert grid.points[0] > 0.01


def test_points_must_increase():
    pts = np.array([0.2, 0.1, 0.3])
    with pytest.raises(ValueError):
        NuisanceGrid(points=pts, lower=0.0, upper=1.0, cell_measure=1.0 / 3)


def test_points_must_stay_in_bounds():
    pts = np.array([0.2, 0.5, 1.2])
    with pytest.raises(ValueError):
        NuisanceGrid(points=pts, lower=0.0, upper=1.0, cell_measure=1.0 / 3)


def test_cell_measure_consistency_enforced():
    pts = np.array([0.25, 0.5, 0.75, 1.0])
    with pytest.raises(ValueError):
        NuisanceGrid(points=pts, lower=0.0, upper=1.0, cell_measure=0.3)


def test_matches_detects_same_and_different_grids():
    a = make_grid(0.01, 0.99, 1.0, 250)
    b = make_grid(0.01, 0.99, 1.0, 250)
    c = make_grid(0.01, 0.99, 1.0, 300)
    assert a.matches(b)
    assert not a.matches(c)
