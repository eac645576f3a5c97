"""Monte Carlo experiments: size, power, local power, and p-value paths.

A configuration fixes everything about a run, including the master seed.
Each replication owns a random stream derived from the seed and a global
replication index, so results are identical no matter how many worker
processes execute them or in what order they finish.  Reductions only sum
integer counts or collect per-replication arrays indexed by replication,
which keeps summaries bitwise reproducible.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import asdict, dataclass

import numpy as np
from joblib import Parallel, delayed
from scipy import stats as sps

from .core import (
    chi2_upper_tail,
    empirical_upper_pvalue,
    icm_bound_factor,
    occupation_time,
    pick_randomized,
    pvot_decide,
    smooth_ave,
    smooth_sup,
)
from .dgp import DgpSpec, gen_sample, make_stream
from .errors import ExperimentUnreliable, PvotError
from .funcform import asym_pvalue_path, icm_test, lm_stat_path, ols_fit, wild_bootstrap_pvalues
from .garch import (
    garch_stat_path,
    load_reference_table,
    save_reference_table,
    sim_pvalue_path,
    sim_pvalue_transform,
    simulate_null_reference,
)
from .grid import NuisanceGrid, make_grid, make_grid_points

# Tabulated integral of the variance path exp(2*lam^2) over [0, 1], used to
# scale the integrated-moment bound in the local power experiment.
ICM_VARIANCE_INTEGRAL = 2.3645

# Reserved stream ids far above any replication index.
_TABLE_TASK = 1 << 40
_PATH_TASK = (1 << 40) + 1_000
# Replications per (dgp, sample size) combination get disjoint id blocks.
_TASK_BLOCK = 10_000_000

# Observations processed per matrix block when accumulating exp(lam * x).
_POWER_CHUNK = 4096

_EXPERIMENTS = ("local_power", "mc_funcform", "mc_garch", "pvalue_paths")
_METHOD_ORDER = ("pvot", "randomized", "sup", "ave", "icm")
_FUNCFORM_DGPS = ("iid_linear", "iid_quadratic", "ar1", "setar")


@dataclass(frozen=True)
class ExperimentConfig:
    """Complete description of one experiment run."""

    experiment: str
    seed: int = 0
    replications: int = 1000
    threads: int = 1
    levels: tuple = (0.01, 0.05, 0.10)
    sample_sizes: tuple = (250,)
    dgps: tuple = _FUNCFORM_DGPS
    methods: tuple = _METHOD_ORDER
    grid_lower: float = 0.0001
    grid_upper: float = 1.0
    grid_coarseness: float | None = 10.0
    grid_points: int | None = None
    bootstrap_replicates: int = 1000
    garch_deltas: tuple = (0.0, 0.3)
    table_replicates: int = 2000
    table_truncation: int = 5000
    power_draws: int = 2000
    drifts: tuple = (0.0, 1.0, 2.0, 3.0, 5.0, 7.0)
    label: str = ""

    def __post_init__(self):
        if self.experiment not in _EXPERIMENTS:
            raise ValueError(
                f"unknown experiment '{self.experiment}'; known: {_EXPERIMENTS}"
            )
        if self.replications < 100:
            raise ValueError(
                f"need at least 100 replications, got {self.replications}"
            )
        if self.threads < 1:
            raise ValueError(f"threads must be at least 1, got {self.threads}")
        for level in self.levels:
            if not 0.0 < level < 1.0:
                raise ValueError(f"levels must lie in (0, 1), got {level}")
        for name in self.methods:
            if name not in _METHOD_ORDER:
                raise ValueError(
                    f"unknown method '{name}'; known: {_METHOD_ORDER}"
                )
        for name in self.dgps:
            DgpSpec(name)  # raises BadDgp for unknown kinds
        if self.grid_points is None and self.grid_coarseness is None:
            raise ValueError("set grid_points or grid_coarseness")

    def grid_for(self, n: int) -> NuisanceGrid:
        if self.grid_points is not None:
            return make_grid_points(self.grid_lower, self.grid_upper, self.grid_points)
        return make_grid(self.grid_lower, self.grid_upper, self.grid_coarseness, n)


def config_hash(config: ExperimentConfig) -> str:
    """Short stable digest of a configuration, ignoring thread count."""
    payload = asdict(config)
    payload.pop("threads")
    text = json.dumps(payload, sort_keys=True, default=float)
    return hashlib.sha256(text.encode()).hexdigest()[:12]


_PRESETS = {
    "desk-local-power": dict(
        experiment="local_power", replications=2000, power_draws=2000,
        grid_lower=0.0, grid_upper=1.0, grid_points=200, grid_coarseness=None,
        levels=(0.05,),
    ),
    "paper-local-power": dict(
        experiment="local_power", replications=100_000, power_draws=100_000,
        grid_lower=0.0, grid_upper=1.0, grid_points=1000, grid_coarseness=None,
        levels=(0.05,),
    ),
    "desk-funcform": dict(
        experiment="mc_funcform", replications=1000, grid_coarseness=10.0,
        sample_sizes=(100, 250, 500), dgps=_FUNCFORM_DGPS,
    ),
    "paper-funcform": dict(
        experiment="mc_funcform", replications=10_000, grid_coarseness=100.0,
        sample_sizes=(100, 250, 500), dgps=_FUNCFORM_DGPS,
    ),
    "desk-garch": dict(
        experiment="mc_garch", replications=250, grid_lower=0.01,
        grid_upper=0.99, grid_points=50, grid_coarseness=None,
        sample_sizes=(250,), table_replicates=2000, table_truncation=5000,
        methods=("pvot", "randomized", "sup", "ave"),
    ),
    "paper-garch": dict(
        experiment="mc_garch", replications=10_000, grid_lower=0.01,
        grid_upper=0.99, grid_coarseness=1.0, grid_points=None,
        sample_sizes=(100, 250, 500), table_replicates=10_000,
        table_truncation=25_000, methods=("pvot", "randomized", "sup", "ave"),
    ),
    "desk-paths": dict(
        experiment="pvalue_paths", replications=100, grid_coarseness=10.0,
        sample_sizes=(250,), dgps=_FUNCFORM_DGPS,
    ),
}


def preset_names() -> tuple[str, ...]:
    return tuple(sorted(_PRESETS))


def preset_config(name: str) -> ExperimentConfig:
    """Named configuration with desk or full-scale defaults."""
    try:
        fields = _PRESETS[name]
    except KeyError:
        raise ValueError(
            f"unknown preset '{name}'; known: {', '.join(preset_names())}"
        ) from None
    return ExperimentConfig(label=name, **fields)


@dataclass(frozen=True)
class McRow:
    method: str
    dgp: str
    n: int
    level: float
    freq: float
    se: float
    reps: int
    failures: int


@dataclass(frozen=True)
class McSummary:
    experiment: str
    rows: tuple
    seed: int
    config_hash: str
    wall_seconds: float

    def find(self, method: str, dgp: str, n: int, level: float) -> McRow:
        for row in self.rows:
            if (row.method == method and row.dgp == dgp and row.n == n
                    and abs(row.level - level) < 1e-9):
                return row
        raise KeyError(f"no row for {method}/{dgp}/n={n}/level={level}")


@dataclass(frozen=True)
class PowerRow:
    method: str
    level: float
    b: float
    power: float
    se: float


@dataclass(frozen=True)
class LocalPowerResult:
    rows: tuple
    seed: int
    config_hash: str
    wall_seconds: float
    replications: int

    def power(self, method: str, level: float, b: float) -> PowerRow:
        for row in self.rows:
            if (row.method == method and abs(row.level - level) < 1e-9
                    and abs(row.b - b) < 1e-9):
                return row
        raise KeyError(f"no row for {method}/level={level}/b={b}")


def _map_replications(worker, count: int, threads: int) -> list:
    if threads <= 1:
        return [worker(i) for i in range(count)]
    return Parallel(n_jobs=threads)(delayed(worker)(i) for i in range(count))


def _binomial_se(freq: float, reps: int) -> float:
    return float(np.sqrt(freq * (1.0 - freq) / reps))


def _ordered_methods(config: ExperimentConfig, available: tuple) -> tuple:
    return tuple(m for m in _METHOD_ORDER if m in config.methods and m in available)


def _drifted_process(x: np.ndarray, eps: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """Accumulate sum_t eps_t exp(lam * x_t) / sqrt(T) in observation blocks."""
    total = np.zeros(len(lam))
    for start in range(0, len(x), _POWER_CHUNK):
        stop = min(start + _POWER_CHUNK, len(x))
        total += eps[start:stop] @ np.exp(np.outer(x[start:stop], lam))
    return total / np.sqrt(len(x))


def run_local_power(config: ExperimentConfig) -> LocalPowerResult:
    """Rejection rates of the limit experiment across drift values.

    Each replication draws one simulated limit path; drift enters through
    b * exp(lam^2).  The occupation-time test compares against its level,
    the randomized test against the chi-squared quantile, the integrated
    moment test against its tabulated bound, and sup/average against
    empirical quantiles of their own zero-drift draws from the same run.
    """
    if config.experiment != "local_power":
        raise ValueError(f"config is for '{config.experiment}', not local_power")
    started = time.perf_counter()
    grid = config.grid_for(config.power_draws)
    lam = grid.points
    drift_shape = np.exp(lam * lam)
    normalizer = np.exp(-lam * lam)
    drifts = tuple(float(b) for b in config.drifts)
    levels = tuple(config.levels)
    draws = config.power_draws

    def worker(rep: int):
        rng = make_stream(config.seed, rep)
        x = rng.standard_normal(draws)
        eps = rng.standard_normal(draws)
        lam_idx = pick_randomized(grid, rng)
        raw = _drifted_process(x, eps, lam)
        centered = raw * normalizer
        pvot_flag = np.zeros((len(drifts), len(levels)), dtype=np.uint8)
        ave_stat = np.empty(len(drifts))
        sup_stat = np.empty(len(drifts))
        rand_stat = np.empty(len(drifts))
        icm_stat = np.empty(len(drifts))
        for j, b in enumerate(drifts):
            shifted = centered + b * drift_shape
            squares = shifted * shifted
            pvals = chi2_upper_tail(squares, 1)
            for l, level in enumerate(levels):
                occ = grid.cell_measure * np.count_nonzero(pvals < level)
                pvot_flag[j, l] = 1 if pvot_decide(occ, level).reject else 0
            ave_stat[j] = grid.cell_measure * squares.sum()
            sup_stat[j] = squares.max()
            rand_stat[j] = squares[lam_idx]
            moment = raw + b * drift_shape
            icm_stat[j] = grid.cell_measure * np.sum(moment * moment)
        return pvot_flag, ave_stat, sup_stat, rand_stat, icm_stat

    collected = _map_replications(worker, config.replications, config.threads)
    pvot_flags = np.stack([c[0] for c in collected])
    ave_stats = np.stack([c[1] for c in collected])
    sup_stats = np.stack([c[2] for c in collected])
    rand_stats = np.stack([c[3] for c in collected])
    icm_stats = np.stack([c[4] for c in collected])
    reps = config.replications
    rows = []
    zero = drifts.index(0.0) if 0.0 in drifts else None
    for l, level in enumerate(levels):
        rand_crit = float(sps.chi2.isf(level, 1))
        icm_crit = ICM_VARIANCE_INTEGRAL * icm_bound_factor(level)
        if zero is None:
            raise ValueError("local power needs drift 0 to calibrate sup/ave")
        ave_crit = float(np.quantile(ave_stats[:, zero], 1.0 - level))
        sup_crit = float(np.quantile(sup_stats[:, zero], 1.0 - level))
        for j, b in enumerate(drifts):
            cells = {
                "pvot": float(np.mean(pvot_flags[:, j, l])),
                "ave": float(np.mean(ave_stats[:, j] > ave_crit)),
                "sup": float(np.mean(sup_stats[:, j] > sup_crit)),
                "randomized": float(np.mean(rand_stats[:, j] > rand_crit)),
                "icm": float(np.mean(icm_stats[:, j] > icm_crit)),
            }
            for method in _ordered_methods(config, tuple(cells)):
                freq = cells[method]
                rows.append(PowerRow(method, level, b, freq, _binomial_se(freq, reps)))
    return LocalPowerResult(
        rows=tuple(rows),
        seed=config.seed,
        config_hash=config_hash(config),
        wall_seconds=time.perf_counter() - started,
        replications=reps,
    )


def _funcform_rep(config: ExperimentConfig, dgp_name: str, n: int,
                  grid: NuisanceGrid, task: int):
    """One functional-form replication: draw, fit, decide all methods."""
    rng = make_stream(config.seed, task)
    levels = config.levels
    want_boot = "sup" in config.methods or "ave" in config.methods
    try:
        sample = gen_sample(DgpSpec(dgp_name), n, rng)
        fit = ols_fit(sample)
        path, context = lm_stat_path(sample, fit, grid)
        pvals = asym_pvalue_path(path)
        lam_idx = pick_randomized(grid, rng)
        boot = {}
        if want_boot:
            boot = wild_bootstrap_pvalues(
                context, fit, rng, transforms=("sup", "ave"),
                replicates=config.bootstrap_replicates,
            )
        rejects = np.zeros((len(_METHOD_ORDER), len(levels)), dtype=np.uint8)
        for l, level in enumerate(levels):
            occ = occupation_time(pvals, level)
            rejects[0, l] = 1 if pvot_decide(occ, level).reject else 0
            rejects[1, l] = 1 if pvals.values[lam_idx] < level else 0
            if want_boot:
                rejects[2, l] = 1 if boot["sup"] < level else 0
                rejects[3, l] = 1 if boot["ave"] < level else 0
            if "icm" in config.methods:
                rejects[4, l] = 1 if icm_test(context, level).reject else 0
        return True, rejects, ""
    except PvotError as exc:
        return False, None, f"{type(exc).__name__}: {exc}"


def run_mc_funcform(config: ExperimentConfig) -> McSummary:
    """Size and power table for the functional-form tests.

    Every (dgp, sample size) pair is replicated independently; rejection
    frequencies, binomial standard errors, effective replication counts,
    and failure counts land in one row per method and level.
    """
    if config.experiment != "mc_funcform":
        raise ValueError(f"config is for '{config.experiment}', not mc_funcform")
    started = time.perf_counter()
    rows = []
    combo = 0
    for dgp_name in config.dgps:
        for n in config.sample_sizes:
            grid = config.grid_for(n)
            base = combo * _TASK_BLOCK
            combo += 1

            def worker(rep: int, dgp_name=dgp_name, n=n, grid=grid, base=base):
                return _funcform_rep(config, dgp_name, n, grid, base + rep)

            collected = _map_replications(worker, config.replications, config.threads)
            failures = sum(1 for ok, _, _ in collected if not ok)
            if failures > 0.01 * config.replications:
                raise ExperimentUnreliable(
                    f"{failures} of {config.replications} replications failed "
                    f"for {dgp_name} at n={n}"
                )
            effective = config.replications - failures
            counts = np.zeros((len(_METHOD_ORDER), len(config.levels)), dtype=np.int64)
            for ok, rejects, _ in collected:
                if ok:
                    counts += rejects
            for method in _ordered_methods(config, _METHOD_ORDER):
                mi = _METHOD_ORDER.index(method)
                for l, level in enumerate(config.levels):
                    freq = counts[mi, l] / effective
                    rows.append(McRow(method, dgp_name, n, level, freq,
                                      _binomial_se(freq, effective),
                                      effective, failures))
    return McSummary(
        experiment="mc_funcform",
        rows=tuple(rows),
        seed=config.seed,
        config_hash=config_hash(config),
        wall_seconds=time.perf_counter() - started,
    )


def _garch_methods(config: ExperimentConfig) -> tuple:
    return _ordered_methods(config, ("pvot", "randomized", "sup", "ave"))


def _garch_rep(config: ExperimentConfig, delta: float, n: int,
               grid: NuisanceGrid, table, task: int):
    """One GARCH replication: draw, profile the QML fit, decide all methods.

    Returns the per-level rejections plus the raw decision statistics used
    later for size-adjusted power: sup, ave, the randomized point value,
    and the occupation time at each level.
    """
    rng = make_stream(config.seed, task)
    levels = config.levels
    try:
        sample = gen_sample(DgpSpec("garch", {"delta": delta}), n, rng)
        path, _ = garch_stat_path(sample.y, grid, rng)
        pvals = sim_pvalue_path(path, table)
        lam_idx = pick_randomized(grid, rng)
        sup_p = sim_pvalue_transform(path, table, "sup")
        ave_p = sim_pvalue_transform(path, table, "ave")
        rand_stat = path.values[lam_idx]
        rand_p = empirical_upper_pvalue(rand_stat, table.draws[:, lam_idx])
        rejects = np.zeros((4, len(levels)), dtype=np.uint8)
        occs = np.empty(len(levels))
        for l, level in enumerate(levels):
            occ = occupation_time(pvals, level)
            occs[l] = occ
            rejects[0, l] = 1 if pvot_decide(occ, level).reject else 0
            rejects[1, l] = 1 if rand_p < level else 0
            rejects[2, l] = 1 if sup_p < level else 0
            rejects[3, l] = 1 if ave_p < level else 0
        stats = np.concatenate((
            [smooth_sup(path), smooth_ave(path), rand_stat], occs
        ))
        return True, rejects, stats, ""
    except PvotError as exc:
        return False, None, None, f"{type(exc).__name__}: {exc}"


def run_mc_garch(config: ExperimentConfig, cache_dir=None) -> McSummary:
    """Size, power, and size-adjusted power for the GARCH no-effects tests.

    One simulated null reference table per grid is shared by every
    replication (and cached when a cache directory is given).  When the
    null (delta 0) is among the configured generator values, additional
    rows labeled dgp + '_sizeadj' report power against empirical null
    quantiles of each decision statistic.
    """
    if config.experiment != "mc_garch":
        raise ValueError(f"config is for '{config.experiment}', not mc_garch")
    started = time.perf_counter()
    methods = _garch_methods(config)
    garch_method_order = ("pvot", "randomized", "sup", "ave")
    rows = []
    combo = 0
    for n_idx, n in enumerate(config.sample_sizes):
        grid = config.grid_for(n)
        table = None
        if cache_dir is not None:
            table = load_reference_table(
                cache_dir, grid, config.table_truncation,
                config.table_replicates, config.seed,
            )
        if table is None:
            table_rng = make_stream(config.seed, _TABLE_TASK + n_idx)
            table = simulate_null_reference(
                grid, config.table_truncation, config.table_replicates, table_rng
            )
            if cache_dir is not None:
                save_reference_table(table, cache_dir, config.seed)
        stats_by_delta = {}
        for delta in config.garch_deltas:
            base = _TASK_BLOCK * (100 + combo)
            combo += 1

            def worker(rep: int, delta=delta, n=n, grid=grid, base=base):
                return _garch_rep(config, delta, n, grid, table, base + rep)

            collected = _map_replications(worker, config.replications, config.threads)
            failures = sum(1 for c in collected if not c[0])
            if failures > 0.01 * config.replications:
                raise ExperimentUnreliable(
                    f"{failures} of {config.replications} replications failed "
                    f"for garch delta={delta:g} at n={n}"
                )
            effective = config.replications - failures
            counts = np.zeros((4, len(config.levels)), dtype=np.int64)
            for c in collected:
                if c[0]:
                    counts += c[1]
            stats_by_delta[delta] = np.stack([c[2] for c in collected if c[0]])
            dgp_label = f"garch_delta{delta:g}"
            for method in methods:
                mi = garch_method_order.index(method)
                for l, level in enumerate(config.levels):
                    freq = counts[mi, l] / effective
                    rows.append(McRow(method, dgp_label, n, level, freq,
                                      _binomial_se(freq, effective),
                                      effective, failures))
        if 0.0 in stats_by_delta:
            null_stats = stats_by_delta[0.0]
            for delta, alt_stats in stats_by_delta.items():
                if delta == 0.0:
                    continue
                label = f"garch_delta{delta:g}_sizeadj"
                reps_here = alt_stats.shape[0]
                for method in methods:
                    for l, level in enumerate(config.levels):
                        if method == "pvot":
                            col = 3 + l
                        else:
                            col = {"sup": 0, "ave": 1, "randomized": 2}[method]
                        crit = float(np.quantile(null_stats[:, col], 1.0 - level))
                        freq = float(np.mean(alt_stats[:, col] > crit))
                        rows.append(McRow(method, label, n, level, freq,
                                          _binomial_se(freq, reps_here),
                                          reps_here, 0))
    return McSummary(
        experiment="mc_garch",
        rows=tuple(rows),
        seed=config.seed,
        config_hash=config_hash(config),
        wall_seconds=time.perf_counter() - started,
    )


def emit_pvalue_paths(config: ExperimentConfig, out_dir, cache_dir=None) -> list:
    """Draw one sample per generator and write its p-value path to CSV.

    Files are named pvalue_path_<dgp>.csv with columns lambda,pvalue;
    occupation times at the configured levels ride along as leading '#'
    comment lines so the data columns stay purely numeric for plotting.
    """
    from . import reporting

    if config.experiment != "pvalue_paths":
        raise ValueError(f"config is for '{config.experiment}', not pvalue_paths")
    n = config.sample_sizes[0]
    digest = config_hash(config)
    written = []
    for idx, dgp_name in enumerate(config.dgps):
        rng = make_stream(config.seed, _PATH_TASK + idx)
        grid = config.grid_for(n)
        sample = gen_sample(DgpSpec(dgp_name), n, rng)
        if dgp_name == "garch":
            table = None
            if cache_dir is not None:
                table = load_reference_table(
                    cache_dir, grid, config.table_truncation,
                    config.table_replicates, config.seed,
                )
            if table is None:
                table_rng = make_stream(config.seed, _TABLE_TASK)
                table = simulate_null_reference(
                    grid, config.table_truncation, config.table_replicates,
                    table_rng,
                )
                if cache_dir is not None:
                    save_reference_table(table, cache_dir, config.seed)
            path, _ = garch_stat_path(sample.y, grid, rng)
            pvals = sim_pvalue_path(path, table)
        else:
            fit = ols_fit(sample)
            path, _ = lm_stat_path(sample, fit, grid)
            pvals = asym_pvalue_path(path)
        comments = reporting.run_comments(digest, config.seed)
        comments.append(f"dgp={dgp_name} n={n}")
        for level in config.levels:
            occ = occupation_time(pvals, level)
            comments.append(
                f"occupation_time level={level:g} value={occ:.17g}"
            )
        out_path = reporting.write_path_csv(
            f"{out_dir}/pvalue_path_{dgp_name}.csv",
            grid.points, None, pvals.values, comments,
        )
        written.append(out_path)
    return written
