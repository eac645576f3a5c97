"""Score test for neglected nonlinearity in a least-squares regression.

The null model is linear in a single regressor with no intercept.  A
logistic weight with a bounded argument, F_t(lam) = 1/(1 + exp(lam *
arctan(x_t - xbar))), scores the residuals at every grid value of the
smoothing weight lam.  The scaled score, its projection-adjusted variance,
and the resulting chi-squared statistic are computed jointly over the
whole grid; wild bootstrap and an integrated moment bound reuse the same
per-observation weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    PValuePath,
    PvotReport,
    StatPath,
    chi2_upper_tail,
    empirical_upper_pvalue,
    icm_bound_factor,
    smooth_ave,
    smooth_sup,
)
from .dgp import Sample
from .errors import DegenerateVariance, SingularDesign
from .grid import NuisanceGrid

# Variance estimates below this floor make the studentized statistic
# meaningless rather than merely noisy.
VARIANCE_FLOOR = 1e-12

_TRANSFORMS = ("sup", "ave")


@dataclass(frozen=True, eq=False)
class LsFit:
    """Least-squares fit of y on the regressor columns, no intercept."""

    beta: np.ndarray
    residuals: np.ndarray
    gram: np.ndarray


@dataclass(frozen=True, eq=False)
class FuncformStatContext:
    """Grid-wide pieces of the score test, kept for bootstrap reuse.

    scaled_moment holds n^{-1/2} * sum_t resid_t * F_t(lam); variance its
    projection-adjusted estimator; weights the n-by-grid matrix of
    adjusted logistic weights.
    """

    grid: NuisanceGrid
    scaled_moment: np.ndarray
    variance: np.ndarray
    weights: np.ndarray


def ols_fit(sample: Sample) -> LsFit:
    """Fit y on x by least squares.

    Raises SingularDesign when the regressor Gram matrix is numerically
    singular.
    """
    x = sample.x
    if x.shape[1] < 1:
        raise SingularDesign("sample has no regressor columns")
    gram = x.T @ x / sample.n
    if np.linalg.cond(gram) > 1e12:
        raise SingularDesign(
            f"regressor Gram matrix is singular (cond {np.linalg.cond(gram):.2e})"
        )
    beta = np.linalg.solve(gram, x.T @ sample.y / sample.n)
    residuals = sample.y - x @ beta
    return LsFit(beta=beta, residuals=residuals, gram=gram)


def weight_transform(x_value, x_mean: float):
    """Bounded one-to-one map of a regressor value: arctan(x - xbar)."""
    return np.arctan(np.asarray(x_value, dtype=float) - x_mean)


def lm_stat_path(sample: Sample, fit: LsFit,
                 grid: NuisanceGrid) -> tuple[StatPath, FuncformStatContext]:
    """Score statistic at every grid point, with reusable context.

    Only single-regressor designs are supported, since the logistic weight
    takes the scalar product of lam with one transformed regressor.
    """
    if sample.x.shape[1] != 1:
        raise ValueError(
            f"the logistic score test needs exactly one regressor column, "
            f"got {sample.x.shape[1]}"
        )
    x = sample.x[:, 0]
    n = sample.n
    psi = weight_transform(x, float(np.mean(x)))
    logistic = 1.0 / (1.0 + np.exp(np.outer(psi, grid.points)))
    resid = fit.residuals
    scaled_moment = resid @ logistic / np.sqrt(n)
    projection = x @ logistic / (n * fit.gram[0, 0])
    weights = logistic - np.outer(x, projection)
    variance = (resid * resid) @ (weights * weights) / n
    if np.any(variance < VARIANCE_FLOOR):
        worst = float(np.min(variance))
        raise DegenerateVariance(
            f"score variance {worst:.3e} fell below {VARIANCE_FLOOR:.0e}"
        )
    values = scaled_moment * scaled_moment / variance
    return (
        StatPath(grid, values),
        FuncformStatContext(grid, scaled_moment, variance, weights),
    )


def asym_pvalue_path(path: StatPath) -> PValuePath:
    """Pointwise chi-squared(1) upper-tail p-values of a statistic path."""
    return PValuePath(path.grid, chi2_upper_tail(path.values, 1))


def wild_bootstrap_pvalues(context: FuncformStatContext, fit: LsFit,
                           rng: np.random.Generator,
                           transforms: tuple[str, ...] = _TRANSFORMS,
                           replicates: int = 1000) -> dict[str, float]:
    """Bootstrap p-values for smoothing transforms of the statistic path.

    Each replicate multiplies the residual-weight products by one vector
    of standard normals shared across every grid point and every requested
    transform, mirroring the dependence structure of the observed path.
    """
    if replicates < 100:
        raise ValueError(f"need at least 100 bootstrap replicates, got {replicates}")
    for name in transforms:
        if name not in _TRANSFORMS:
            raise ValueError(f"unknown transform '{name}'; allowed: {_TRANSFORMS}")
    observed = StatPath(
        context.grid, context.scaled_moment ** 2 / context.variance
    )
    scored = fit.residuals[:, None] * context.weights
    n = scored.shape[0]
    draws = rng.standard_normal((n, replicates))
    boot_moment = draws.T @ scored / np.sqrt(n)
    boot_stats = boot_moment ** 2 / context.variance[None, :]
    out = {}
    for name in transforms:
        if name == "sup":
            obs = smooth_sup(observed)
            ref = boot_stats.max(axis=1)
        else:
            obs = smooth_ave(observed)
            ref = context.grid.cell_measure * boot_stats.sum(axis=1)
        out[name] = empirical_upper_pvalue(obs, ref)
    return out


def wild_bootstrap_pvalue(context: FuncformStatContext, fit: LsFit,
                          transform: str, rng: np.random.Generator,
                          replicates: int = 1000) -> float:
    """Bootstrap p-value for a single smoothing transform."""
    return wild_bootstrap_pvalues(
        context, fit, rng, transforms=(transform,), replicates=replicates
    )[transform]


def icm_test(context: FuncformStatContext, level: float) -> PvotReport:
    """Integrated squared-score test against its tabulated variance bound.

    Rejects when the grid average of the squared scaled moment reaches the
    tabulated multiple of the grid-average variance; the report carries
    the statistic-to-bound ratio capped at one.
    """
    factor = icm_bound_factor(level)
    stat = smooth_ave(StatPath(context.grid, context.scaled_moment ** 2))
    bound = factor * smooth_ave(StatPath(context.grid, context.variance))
    ratio = stat / bound
    return PvotReport(level, min(1.0, ratio), ratio >= 1.0, "icm")
