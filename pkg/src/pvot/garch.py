"""Test for no conditional-variance feedback in a GARCH(1,1) model.

Under the null the squared-return coefficient is zero and the smoothing
weight disappears from the model, so the weight is profiled out on a grid:
at each grid value the remaining two parameters are fit by Gaussian QML
over a box, and the statistic is n times the squared coefficient estimate.
P-values come from a simulated reference table for the asymptotic null
process, which is a truncated geometric sum of independent normals scaled
so its variance at weight w is 1 - w^2; statistics compare against the
squared positive part of those draws.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .core import StatPath, PValuePath, empirical_upper_pvalue, smooth_ave, smooth_sup
from .errors import GridMismatch, NoConvergence, PathUnreliable
from .grid import NuisanceGrid
from .optimize import minimize_box

_KERNEL_CHUNK = 256
_FILTER_B = np.array([1.0])


@dataclass(frozen=True)
class GarchSpace:
    """Admissible region for (omega, delta) and the grid domain for lam.

    The omega ceiling needs headroom above the unconditional variance of
    the series: the profiled intercept at smoothing weight w targets
    var(y) * (1 - w), and when the box clips it the fit leaks into delta
    and biases the statistic path upward at small w.  The default ceiling
    of 10 keeps the box slack for series with variance up to about 10.
    """

    omega_bounds: tuple[float, float] = (0.001, 10.0)
    delta_bounds: tuple[float, float] = (0.0, 0.99)
    lam_bounds: tuple[float, float] = (0.01, 0.99)

    def __post_init__(self):
        for name in ("omega_bounds", "delta_bounds", "lam_bounds"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValueError(f"{name} must satisfy lower < upper, got {lo}, {hi}")
        if self.omega_bounds[0] <= 0:
            raise ValueError("omega lower bound must be positive")


@dataclass(frozen=True)
class QmlFit:
    """Profiled QML estimate at one fixed smoothing weight."""

    omega: float
    delta: float
    lam: float
    objective: float
    converged: bool
    iterations: int
    stop_reason: str


def _make_objective(y: np.ndarray, lam: float):
    """Gaussian QML criterion in (omega, delta) at fixed lam.

    The variance recursion starts from omega/(1-lam) with the presample
    squared observation set to zero, and the criterion sums
    log s2_t + y_t^2/s2_t over the sample.
    """
    y = np.ascontiguousarray(y, dtype=float)
    y2 = y * y
    lagged = np.empty_like(y2)
    lagged[0] = 0.0
    lagged[1:] = y2[:-1]
    poles = np.array([1.0, -lam])

    def objective(params) -> float:
        omega, delta = params
        start = omega / (1.0 - lam)
        driven = omega + delta * lagged
        s2 = lfilter(_FILTER_B, poles, driven, zi=np.array([lam * start]))[0]
        if s2[-1] <= 0.0 or np.any(s2 <= 0.0):
            return np.inf
        return float(np.sum(np.log(s2) + y2 / s2))

    return objective


def garch_objective(y: np.ndarray, omega: float, delta: float, lam: float) -> float:
    """QML criterion value at one parameter point."""
    if not 0.0 <= lam < 1.0:
        raise ValueError(f"lam must lie in [0, 1), got {lam}")
    if omega <= 0.0:
        raise ValueError(f"omega must be positive, got {omega}")
    return _make_objective(np.asarray(y, dtype=float), lam)((omega, delta))


def _qml_best(y, lam, space, rng, starts, tol, rel_step, max_iter):
    lo, hi = space.lam_bounds
    if not lo <= lam <= hi:
        raise ValueError(f"lam {lam} outside the grid domain [{lo}, {hi}]")
    lower = np.array([space.omega_bounds[0], space.delta_bounds[0]])
    upper = np.array([space.omega_bounds[1], space.delta_bounds[1]])
    objective = _make_objective(y, lam)
    start_points = lower + rng.uniform(size=(starts, 2)) * (upper - lower)
    results = [
        minimize_box(objective, point, lower, upper,
                     tol=tol, rel_step=rel_step, max_iter=max_iter)
        for point in start_points
    ]
    best = min(results, key=lambda r: r.value)
    fit = QmlFit(
        omega=float(best.x[0]),
        delta=float(best.x[1]),
        lam=float(lam),
        objective=best.value,
        converged=any(r.converged for r in results),
        iterations=best.iterations,
        stop_reason=best.stop_reason,
    )
    return fit


def qml_fit(y: np.ndarray, lam: float, rng: np.random.Generator,
            space: GarchSpace | None = None, *, starts: int = 3,
            tol: float = 1e-4, rel_step: float = 1e-6,
            max_iter: int = 500) -> QmlFit:
    """Fit (omega, delta) by QML at fixed lam with uniform multi-starts.

    The best objective over all starts wins.  Raises NoConvergence when no
    start meets the stopping rule within the iteration cap.
    """
    space = space or GarchSpace()
    y = np.asarray(y, dtype=float)
    fit = _qml_best(y, lam, space, rng, starts, tol, rel_step, max_iter)
    if not fit.converged:
        raise NoConvergence(
            f"no start converged at lam={lam} within {max_iter} iterations"
        )
    return fit


def garch_stat_path(y: np.ndarray, grid: NuisanceGrid, rng: np.random.Generator,
                    space: GarchSpace | None = None, *, starts: int = 3,
                    tol: float = 1e-4, rel_step: float = 1e-6,
                    max_iter: int = 500) -> tuple[StatPath, list[int]]:
    """Statistic path n*delta_hat(lam)^2 over the grid.

    Grid points where no optimizer start converged keep the best probed
    estimate and are reported in the second return value; more than 5% of
    them raises PathUnreliable.
    """
    space = space or GarchSpace()
    y = np.asarray(y, dtype=float)
    n = len(y)
    values = np.empty(len(grid))
    failed: list[int] = []
    for i, lam in enumerate(grid.points):
        fit = _qml_best(y, lam, space, rng, starts, tol, rel_step, max_iter)
        if not fit.converged:
            failed.append(i)
        values[i] = n * fit.delta * fit.delta
    if len(failed) > 0.05 * len(grid):
        raise PathUnreliable(
            f"{len(failed)} of {len(grid)} grid points failed to converge"
        )
    return StatPath(grid, values), failed


@dataclass(frozen=True, eq=False)
class NullReferenceTable:
    """Simulated null statistics, one row per replicate, one column per grid point."""

    grid: NuisanceGrid
    draws: np.ndarray
    truncation: int

    def __post_init__(self):
        draws = np.asarray(self.draws, dtype=float)
        object.__setattr__(self, "draws", draws)
        if draws.ndim != 2 or draws.shape[1] != len(self.grid):
            raise ValueError(
                f"draws shape {draws.shape} does not match {len(self.grid)} grid points"
            )
        if draws.shape[0] < 1:
            raise ValueError("reference table needs at least one replicate")
        if np.any(draws < 0):
            raise ValueError("reference statistics must be nonnegative")

    @property
    def replicates(self) -> int:
        return self.draws.shape[0]


def simulate_kernel_draws(grid: NuisanceGrid, truncation: int, replicates: int,
                          rng: np.random.Generator) -> np.ndarray:
    """Draws of the limit process: (1-lam^2) * sum_j lam^j Z_j, j = 0..truncation.

    One normal sequence per replicate is shared across all grid points, so
    columns inherit the kernel covariance
    (1-lam1^2)(1-lam2^2)/(1-lam1*lam2) up to truncation error.
    """
    if truncation < 1:
        raise ValueError(f"truncation must be at least 1, got {truncation}")
    if replicates < 1:
        raise ValueError(f"need at least one replicate, got {replicates}")
    lam = grid.points
    if lam[0] < 0 or lam[-1] >= 1:
        raise ValueError("kernel draws need grid points inside [0, 1)")
    powers = lam[None, :] ** np.arange(truncation + 1)[:, None]
    scale = 1.0 - lam * lam
    out = np.empty((replicates, len(lam)))
    for start in range(0, replicates, _KERNEL_CHUNK):
        stop = min(start + _KERNEL_CHUNK, replicates)
        z = rng.standard_normal((stop - start, truncation + 1))
        out[start:stop] = (z @ powers) * scale
    return out


def simulate_null_reference(grid: NuisanceGrid, truncation: int, replicates: int,
                            rng: np.random.Generator) -> NullReferenceTable:
    """Reference table of squared positive parts of the kernel draws."""
    draws = simulate_kernel_draws(grid, truncation, replicates, rng)
    np.maximum(draws, 0.0, out=draws)
    np.square(draws, out=draws)
    return NullReferenceTable(grid, draws, truncation)


def sim_pvalue_path(path: StatPath, table: NullReferenceTable) -> PValuePath:
    """Pointwise simulated p-values: share of reference draws above the path."""
    if not table.grid.matches(path.grid):
        raise GridMismatch("statistic path and reference table use different grids")
    values = np.mean(table.draws > path.values[None, :], axis=0)
    return PValuePath(path.grid, values)


def sim_pvalue_transform(path: StatPath, table: NullReferenceTable,
                         transform: str) -> float:
    """Simulated p-value of the sup or average of the statistic path."""
    if not table.grid.matches(path.grid):
        raise GridMismatch("statistic path and reference table use different grids")
    if transform == "sup":
        observed = smooth_sup(path)
        rows = table.draws.max(axis=1)
    elif transform == "ave":
        observed = smooth_ave(path)
        rows = table.grid.cell_measure * table.draws.sum(axis=1)
    else:
        raise ValueError(f"transform must be 'sup' or 'ave', got '{transform}'")
    return empirical_upper_pvalue(observed, rows)


def reference_cache_key(grid: NuisanceGrid, truncation: int, replicates: int,
                        seed: int) -> str:
    """Short content key identifying one reference-table build."""
    digest = hashlib.sha256()
    digest.update(np.ascontiguousarray(grid.points).tobytes())
    digest.update(f"|{grid.cell_measure!r}|{truncation}|{replicates}|{seed}".encode())
    return digest.hexdigest()[:12]


def _cache_paths(cache_dir: Path, key: str) -> tuple[Path, Path]:
    return cache_dir / f"garch_null_{key}.csv", cache_dir / f"garch_null_{key}.json"


def save_reference_table(table: NullReferenceTable, cache_dir: str | Path,
                         seed: int) -> Path:
    """Store a table as CSV plus a JSON sidecar describing how it was built."""
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    key = reference_cache_key(table.grid, table.truncation, table.replicates, seed)
    csv_path, meta_path = _cache_paths(cache_dir, key)
    header = ",".join(f"{lam:.17g}" for lam in table.grid.points)
    np.savetxt(csv_path, table.draws, fmt="%.17g", delimiter=",",
               header=header, comments="")
    meta = {
        "key": key,
        "points": [float(v) for v in table.grid.points],
        "lower": table.grid.lower,
        "upper": table.grid.upper,
        "cell_measure": table.grid.cell_measure,
        "truncation": table.truncation,
        "replicates": table.replicates,
        "seed": int(seed),
    }
    meta_path.write_text(json.dumps(meta, indent=2) + "\n")
    return csv_path


def load_reference_table(cache_dir: str | Path, grid: NuisanceGrid,
                         truncation: int, replicates: int,
                         seed: int) -> NullReferenceTable | None:
    """Reload a cached table matching the build parameters, or None."""
    cache_dir = Path(cache_dir)
    key = reference_cache_key(grid, truncation, replicates, seed)
    csv_path, meta_path = _cache_paths(cache_dir, key)
    if not (csv_path.exists() and meta_path.exists()):
        return None
    meta = json.loads(meta_path.read_text())
    stored = NuisanceGrid(np.asarray(meta["points"]), meta["lower"],
                          meta["upper"], meta["cell_measure"])
    if not stored.matches(grid) or meta["truncation"] != truncation \
            or meta["replicates"] != replicates or meta["seed"] != seed:
        raise GridMismatch(
            f"cache entry {key} does not match the requested build parameters"
        )
    draws = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
    return NullReferenceTable(grid, draws, truncation)
