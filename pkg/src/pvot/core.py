"""Occupation-time machinery shared by every test in the package.

A test hands us a p-value path over a nuisance grid.  The occupation time
is the measure of grid cells whose p-value sits strictly below the test
level; the test rejects when that measure strictly exceeds the level, so
ties break toward non-rejection.  Smoothing transforms (sup, average) and
the randomized single-point rule live here too because every concrete test
reuses them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import EmptyReference, UnsupportedLevel
from .grid import NuisanceGrid

# Upper bound for the average of squared moment paths, scaled per level.
# Keys are test levels; values are the tabulated constants for the
# integrated conditional moment bound.
ICM_BOUND_FACTORS = {0.01: 6.81, 0.05: 4.26, 0.10: 3.23}


@dataclass(frozen=True, eq=False)
class StatPath:
    """Nonnegative test statistics evaluated at each grid point."""

    grid: NuisanceGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if vals.shape != (len(self.grid),):
            raise ValueError(
                f"path has {vals.shape} values for {len(self.grid)} grid points"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("statistic path contains non-finite values")
        if np.any(vals < 0):
            raise ValueError("statistic path contains negative values")


@dataclass(frozen=True, eq=False)
class PValuePath:
    """Pointwise p-values aligned with a nuisance grid."""

    grid: NuisanceGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if vals.shape != (len(self.grid),):
            raise ValueError(
                f"path has {vals.shape} values for {len(self.grid)} grid points"
            )
        if np.any(vals < 0) or np.any(vals > 1) or not np.all(np.isfinite(vals)):
            raise ValueError("p-values must lie in [0, 1]")


@dataclass(frozen=True)
class PvotReport:
    """Decision record for one method at one level.

    occupation_time carries the [0, 1] quantity the decision compares
    against the level: the occupation time itself for the occupation-time
    test, the p-value for p-value based methods, and the statistic-to-bound
    ratio capped at one for the integrated moment bound.
    """

    level: float
    occupation_time: float
    reject: bool
    method: str


def _check_level(level: float) -> float:
    level = float(level)
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    return level


def occupation_time(path: PValuePath, level: float) -> float:
    """Measure of grid cells whose p-value lies strictly below level."""
    level = _check_level(level)
    return path.grid.cell_measure * int(np.count_nonzero(path.values < level))


def pvot_decide(occ_time: float, level: float) -> PvotReport:
    """Reject when the occupation time strictly exceeds the level."""
    level = _check_level(level)
    if not 0.0 <= occ_time <= 1.0:
        raise ValueError(f"occupation time must lie in [0, 1], got {occ_time}")
    return PvotReport(level, occ_time, occ_time > level, "pvot")


def report_from_pvalue(pvalue: float, level: float, method: str) -> PvotReport:
    """Decision record for a method that rejects when its p-value < level."""
    level = _check_level(level)
    return PvotReport(level, float(pvalue), pvalue < level, method)


def chi2_upper_tail(t, dof: int = 1):
    """P(X > t) for X chi-squared with dof degrees of freedom.

    Computed through the regularized upper incomplete gamma function;
    accepts scalars or arrays.
    """
    if dof < 1:
        raise ValueError(f"dof must be a positive integer, got {dof}")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("chi-squared statistics must be nonnegative")
    out = special.gammaincc(dof / 2.0, t / 2.0)
    return float(out) if out.ndim == 0 else out


def smooth_sup(path: StatPath) -> float:
    """Largest statistic over the grid."""
    return float(np.max(path.values))


def smooth_ave(path: StatPath) -> float:
    """Grid integral of the statistic path (cell measure times sum)."""
    return path.grid.cell_measure * float(np.sum(path.values))


def pick_randomized(grid: NuisanceGrid, rng: np.random.Generator) -> int:
    """Index of a grid point drawn uniformly at random."""
    return int(rng.integers(len(grid)))


def empirical_upper_pvalue(stat: float, reference: np.ndarray) -> float:
    """Fraction of reference draws strictly above the observed statistic."""
    reference = np.asarray(reference, dtype=float)
    if reference.size == 0:
        raise EmptyReference("reference sample is empty")
    return float(np.count_nonzero(reference > stat)) / reference.size


def icm_bound_factor(level: float) -> float:
    """Tabulated scale for the integrated-moment upper bound at a level."""
    _check_level(level)
    try:
        return ICM_BOUND_FACTORS[round(level, 10)]
    except KeyError:
        raise UnsupportedLevel(
            f"no tabulated bound for level {level}; "
            f"supported: {sorted(ICM_BOUND_FACTORS)}"
        ) from None
