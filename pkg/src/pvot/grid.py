"""Discretized nuisance-parameter grids.

A grid covers an interval [lower, upper] with equally spaced points that
exclude the left endpoint, and it carries the measure of a single cell so
that integrals over the grid are plain weighted sums.  The cell measure is
normalized to 1/(number of points), which makes every grid integral an
average and keeps occupation times inside [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GridTooCoarse


@dataclass(frozen=True, eq=False)
class NuisanceGrid:
    """Equally spaced evaluation points for a nuisance parameter.

    Attributes
    ----------
    points : np.ndarray
        Strictly increasing points inside [lower, upper].
    lower, upper : float
        Interval endpoints, lower < upper.
    cell_measure : float
        Weight of one grid cell; cell_measure * len(points) == 1.
    """

    points: np.ndarray
    lower: float
    upper: float
    cell_measure: float = field(default=0.0)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        object.__setattr__(self, "points", pts)
        if pts.ndim != 1:
            raise ValueError("grid points must form a 1-D array")
        if len(pts) < 2:
            raise GridTooCoarse(
                f"need at least 2 grid points, got {len(pts)}"
            )
        if not self.lower < self.upper:
            raise ValueError(f"need lower < upper, got [{self.lower}, {self.upper}]")
        if not np.all(np.diff(pts) > 0):
            raise ValueError("grid points must be strictly increasing")
        tol = 1e-9 * max(1.0, abs(self.upper), abs(self.lower))
        if pts[0] < self.lower - tol or pts[-1] > self.upper + tol:
            raise ValueError(
                f"grid points [{pts[0]}, {pts[-1]}] escape the interval "
                f"[{self.lower}, {self.upper}]"
            )
        if abs(self.cell_measure * len(pts) - 1.0) > 1e-12:
            raise ValueError(
                f"cell_measure {self.cell_measure} does not normalize "
                f"{len(pts)} points to unit mass"
            )

    def __len__(self) -> int:
        return len(self.points)

    def matches(self, other: "NuisanceGrid") -> bool:
        """True when two grids have identical points and cell measure."""
        return (
            len(self) == len(other)
            and self.cell_measure == other.cell_measure
            and bool(np.array_equal(self.points, other.points))
        )


def make_grid(lower: float, upper: float, coarseness: float, n: int) -> NuisanceGrid:
    """Build the grid {lower + i/(coarseness*n) : i = 1..imax} inside [lower, upper].

    The step shrinks with the sample size n; coarseness scales how many
    points land per unit of nuisance space.  imax is the largest i whose
    point still lies at or below upper, and the cell measure is 1/imax.

    Raises
    ------
    GridTooCoarse
        If fewer than two points fit.
    """
    if not lower < upper:
        raise ValueError(f"need lower < upper, got [{lower}, {upper}]")
    density = float(coarseness) * int(n)
    if density < 2:
        raise GridTooCoarse(
            f"coarseness*n = {density} admits fewer than 2 points"
        )
    # Slack absorbs float error when (upper-lower)*density is an exact integer.
    imax = int(np.floor((upper - lower) * density + 1e-6))
    if imax < 2:
        raise GridTooCoarse(
            f"only {imax} points of step 1/{density} fit in [{lower}, {upper}]"
        )
    points = lower + np.arange(1, imax + 1) / density
    points[points > upper] = upper
    return NuisanceGrid(points, float(lower), float(upper), 1.0 / imax)


def make_grid_points(lower: float, upper: float, num_points: int) -> NuisanceGrid:
    """Build a grid of exactly num_points equal steps ending at upper."""
    if num_points < 2:
        raise GridTooCoarse(f"need at least 2 points, got {num_points}")
    if not lower < upper:
        raise ValueError(f"need lower < upper, got [{lower}, {upper}]")
    step = (upper - lower) / num_points
    points = lower + np.arange(1, num_points + 1) * step
    points[-1] = upper
    return NuisanceGrid(points, float(lower), float(upper), 1.0 / num_points)
