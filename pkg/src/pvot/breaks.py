"""Wald test for a one-time coefficient break at an unknown sample fraction.

Each grid value of the break fraction maps to a split index by nearest-
integer rounding; coefficients are estimated separately on the two
segments, and the Wald statistic contrasts them under a homoskedastic
covariance built from the pooled residual variance.  Pointwise p-values
are chi-squared with one degree of freedom per restricted coefficient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import PValuePath, StatPath, chi2_upper_tail
from .dgp import Sample
from .errors import SingularSegment
from .grid import NuisanceGrid


@dataclass(frozen=True, eq=False)
class BreakFitPair:
    """Per-split estimation record: coefficients either side and the Wald value."""

    split_index: int
    beta_pre: np.ndarray
    beta_post: np.ndarray
    wald: float


def split_index_for(fraction: float, n: int) -> int:
    """Nearest-integer split position for a break fraction."""
    return int(np.floor(fraction * n + 0.5))


def _solve_segment(gram: np.ndarray, moment: np.ndarray, label: str) -> np.ndarray:
    if np.linalg.cond(gram) > 1e12:
        raise SingularSegment(f"{label} segment Gram matrix is singular")
    return np.linalg.solve(gram, moment)


def break_fit_at(sample: Sample, fraction: float) -> BreakFitPair:
    """Two-segment fit and Wald contrast at a single break fraction."""
    x, y, n = sample.x, sample.y, sample.n
    k = x.shape[1]
    split = split_index_for(fraction, n)
    if split < k + 1 or split > n - k - 1:
        raise SingularSegment(
            f"break fraction {fraction} leaves a segment shorter than {k + 1} "
            f"observations (split {split} of {n})"
        )
    gram_pre = x[:split].T @ x[:split]
    gram_post = x[split:].T @ x[split:]
    moment_pre = x[:split].T @ y[:split]
    moment_post = x[split:].T @ y[split:]
    beta_pre = _solve_segment(gram_pre, moment_pre, "pre-break")
    beta_post = _solve_segment(gram_post, moment_post, "post-break")
    ssr = (y @ y) - beta_pre @ moment_pre - beta_post @ moment_post
    sigma2 = ssr / n
    contrast = beta_pre - beta_post
    if not np.any(contrast):
        # Coinciding estimates give a zero quadratic form no matter how
        # degenerate the residual variance is.
        return BreakFitPair(split, beta_pre, beta_post, 0.0)
    spread = sigma2 * (np.linalg.inv(gram_pre) + np.linalg.inv(gram_post))
    try:
        wald = float(contrast @ np.linalg.solve(spread, contrast))
    except np.linalg.LinAlgError:
        raise SingularSegment(
            f"contrast covariance is singular at fraction {fraction}"
        ) from None
    return BreakFitPair(split, beta_pre, beta_post, max(wald, 0.0))


def break_wald_path(sample: Sample, grid: NuisanceGrid) -> StatPath:
    """Wald statistics over a grid of candidate break fractions.

    The grid must keep every split at least k+1 observations away from
    both sample ends; SingularSegment names the first offending fraction.
    """
    values = np.empty(len(grid))
    for i, fraction in enumerate(grid.points):
        values[i] = break_fit_at(sample, fraction).wald
    return StatPath(grid, values)


def break_pvalue_path(path: StatPath, restrictions: int) -> PValuePath:
    """Chi-squared upper-tail p-values with one degree per restriction."""
    if restrictions < 1:
        raise ValueError(f"restrictions must be positive, got {restrictions}")
    return PValuePath(path.grid, chi2_upper_tail(path.values, restrictions))
