"""Command-line front end.

Seven subcommands: three single-dataset tests (test-funcform, test-garch,
test-break), three batch experiments (mc, local-power, paths), and cache
maintenance.  Experiment settings resolve in precedence order: command-line
overrides, then a config file, then the chosen preset.  Every run writes a
manifest next to its outputs recording the effective configuration, the
seed, and library versions; all randomness descends from --seed alone.

Exit codes: 0 success, 1 usage error, 2 runtime error, 3 when an
experiment aborts because too many replications failed.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import experiments, reporting
from .breaks import break_pvalue_path, break_wald_path
from .core import (
    empirical_upper_pvalue,
    occupation_time,
    pick_randomized,
    pvot_decide,
    report_from_pvalue,
)
from .dgp import make_stream, read_sample_csv
from .errors import ExperimentUnreliable, PvotError
from .experiments import ExperimentConfig, config_hash, preset_config, preset_names
from .funcform import asym_pvalue_path, icm_test, lm_stat_path, ols_fit, wild_bootstrap_pvalues
from .garch import (
    garch_stat_path,
    load_reference_table,
    save_reference_table,
    sim_pvalue_path,
    sim_pvalue_transform,
    simulate_null_reference,
)
from .grid import make_grid


class UsageError(Exception):
    """Bad invocation: unknown flag, key, preset, or malformed value."""


class _Parser(argparse.ArgumentParser):
    """argparse variant that raises instead of exiting on bad usage."""

    def error(self, message):
        raise UsageError(message)


_INT_FIELDS = {"seed", "replications", "threads", "grid_points",
               "bootstrap_replicates", "table_replicates",
               "table_truncation", "power_draws"}
_FLOAT_FIELDS = {"grid_lower", "grid_upper", "grid_coarseness"}
_FLOAT_TUPLE_FIELDS = {"levels", "garch_deltas", "drifts"}
_INT_TUPLE_FIELDS = {"sample_sizes"}
_STR_TUPLE_FIELDS = {"dgps", "methods"}
_STR_FIELDS = {"experiment", "label"}
_OPTIONAL_FIELDS = {"grid_points", "grid_coarseness"}
_CONFIG_FIELDS = (_INT_FIELDS | _FLOAT_FIELDS | _FLOAT_TUPLE_FIELDS
                  | _INT_TUPLE_FIELDS | _STR_TUPLE_FIELDS | _STR_FIELDS)


def _coerce(key: str, value):
    """Convert a config-file or --set value to the field's native type."""
    if key not in _CONFIG_FIELDS:
        raise UsageError(f"unknown config key '{key}'")
    if key in _OPTIONAL_FIELDS and (value is None or str(value).strip().lower()
                                    in ("", "none")):
        return None
    try:
        if key in _INT_FIELDS:
            return int(value)
        if key in _FLOAT_FIELDS:
            return float(value)
        if key in _FLOAT_TUPLE_FIELDS:
            return _parse_float_list(value)
        if key in _INT_TUPLE_FIELDS:
            if isinstance(value, (list, tuple)):
                return tuple(int(v) for v in value)
            return tuple(int(tok) for tok in _split(value))
        if key in _STR_TUPLE_FIELDS:
            if isinstance(value, (list, tuple)):
                return tuple(str(v) for v in value)
            return tuple(_split(value))
    except (TypeError, ValueError):
        raise UsageError(f"bad value '{value}' for config key '{key}'") from None
    return str(value)


def _split(text) -> list:
    return [tok.strip() for tok in str(text).split(",") if tok.strip()]


def _parse_float_list(value) -> tuple:
    if isinstance(value, (list, tuple)):
        return tuple(float(v) for v in value)
    return tuple(float(tok) for tok in _split(value))


def _parse_levels(text: str) -> tuple:
    levels = _parse_float_list(text)
    if not levels:
        raise UsageError(f"no levels in '{text}'")
    for level in levels:
        if not 0.0 < level < 1.0:
            raise UsageError(f"level {level:g} outside (0, 1)")
    return levels


def _parse_grid_flag(text: str) -> dict:
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(
            f"bad --grid '{text}'; expected lower:upper:coarseness"
        )
    try:
        lower, upper, coarseness = (float(p) for p in parts)
    except ValueError:
        raise UsageError(f"bad --grid '{text}'; parts must be numbers") from None
    return {"grid_lower": lower, "grid_upper": upper,
            "grid_coarseness": coarseness, "grid_points": None}


def _read_config_file(path: str) -> dict:
    """Settings from an INI-style file or a previously written manifest."""
    file_path = Path(path)
    if not file_path.is_file():
        raise UsageError(f"config file '{path}' not found")
    text = file_path.read_text()
    if file_path.suffix == ".json" or text.lstrip().startswith("{"):
        payload = json.loads(text)
        if "config" in payload:
            payload = payload["config"]
        return {key: _coerce(key, value) for key, value in payload.items()}
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text, source=path)
    except configparser.Error as exc:
        raise UsageError(f"cannot parse config file '{path}': {exc}") from None
    settings = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            if key in settings:
                raise UsageError(
                    f"config key '{key}' appears in more than one section"
                )
            settings[key] = _coerce(key, value)
    return settings


_DEFAULT_PRESETS = {"mc": "desk-funcform", "local-power": "desk-local-power",
                    "paths": "desk-paths"}
_COMMAND_EXPERIMENTS = {
    "mc": ("mc_funcform", "mc_garch"),
    "local-power": ("local_power",),
    "paths": ("pvalue_paths",),
}


def _resolve_experiment_config(command: str, args) -> ExperimentConfig:
    preset = args.preset or _DEFAULT_PRESETS[command]
    if preset not in preset_names():
        raise UsageError(
            f"unknown preset '{preset}'; known: {', '.join(preset_names())}"
        )
    settings = asdict(preset_config(preset))
    if args.config:
        settings.update(_read_config_file(args.config))
    for pair in args.set or []:
        if "=" not in pair:
            raise UsageError(f"bad override '{pair}'; expected key=value")
        key, _, value = pair.partition("=")
        settings[key.strip()] = _coerce(key.strip(), value.strip())
    if args.levels:
        settings["levels"] = _parse_levels(args.levels)
    if args.grid:
        settings.update(_parse_grid_flag(args.grid))
    if args.seed is not None:
        settings["seed"] = args.seed
    if args.threads is not None:
        settings["threads"] = args.threads
    try:
        config = ExperimentConfig(**settings)
    except TypeError as exc:
        raise UsageError(str(exc)) from None
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    allowed = _COMMAND_EXPERIMENTS[command]
    if config.experiment not in allowed:
        raise UsageError(
            f"'{command}' cannot run experiment '{config.experiment}'; "
            f"expected one of {allowed}"
        )
    return config


def _cache_dir(args) -> str | None:
    cache = getattr(args, "cache", None) or os.environ.get("PVOT_CACHE_DIR")
    return cache or None


def _describe(report) -> str:
    carrier = {"pvot": "occupation_time", "icm": "bound_ratio"}.get(
        report.method, "pvalue")
    return (f"method={report.method} level={report.level:g} "
            f"{carrier}={report.occupation_time:.6g} reject={report.reject}")


def _print_reports(reports) -> None:
    for report in reports:
        print(_describe(report))


def _settings_digest(payload: dict) -> str:
    import hashlib

    text = json.dumps(payload, sort_keys=True, default=str)
    return hashlib.sha256(text.encode()).hexdigest()[:12]


def _write_test_outputs(args, command: str, payload: dict, grid, stats,
                        pvals, reports, started: float) -> None:
    out_dir = Path(args.out)
    digest = _settings_digest(payload)
    comments = reporting.run_comments(digest, args.seed)
    for report in reports:
        comments.append(_describe(report))
    name = command.replace("test-", "") + "_path.csv"
    csv_path = reporting.write_path_csv(
        out_dir / name, grid.points, stats, pvals.values, comments)
    reporting.write_manifest(
        out_dir, command, payload, digest, args.seed, [csv_path.name],
        {"wall_seconds": time.perf_counter() - started},
    )
    print(f"wrote {csv_path}")


def _cmd_test_funcform(args) -> int:
    started = time.perf_counter()
    sample = read_sample_csv(args.data)
    levels = _parse_levels(args.levels)
    grid_spec = _parse_grid_flag(args.grid)
    grid = make_grid(grid_spec["grid_lower"], grid_spec["grid_upper"],
                     grid_spec["grid_coarseness"], sample.n)
    methods = tuple(_split(args.methods))
    for m in methods:
        if m not in ("pvot", "randomized", "sup", "ave", "icm"):
            raise UsageError(f"unknown method '{m}'")
    rng = make_stream(args.seed, 0)
    fit = ols_fit(sample)
    path, context = lm_stat_path(sample, fit, grid)
    pvals = asym_pvalue_path(path)
    boot = {}
    if "sup" in methods or "ave" in methods:
        boot = wild_bootstrap_pvalues(
            context, fit, rng, transforms=("sup", "ave"),
            replicates=args.bootstrap)
    lam_idx = pick_randomized(grid, rng)
    reports = []
    for level in levels:
        for method in methods:
            if method == "pvot":
                reports.append(pvot_decide(occupation_time(pvals, level), level))
            elif method == "randomized":
                reports.append(report_from_pvalue(
                    float(pvals.values[lam_idx]), level, "randomized"))
            elif method == "icm":
                reports.append(icm_test(context, level))
            else:
                reports.append(report_from_pvalue(boot[method], level, method))
    _print_reports(reports)
    payload = {"data": str(args.data), "levels": list(levels),
               "grid": args.grid, "methods": list(methods),
               "bootstrap": args.bootstrap, "seed": args.seed}
    _write_test_outputs(args, "test-funcform", payload, grid, path.values,
                        pvals, reports, started)
    return 0


def _load_series(path: str) -> np.ndarray:
    """One observed series: either a sample CSV or a single y column."""
    file_path = Path(path)
    first = ""
    with open(file_path) as handle:
        first = handle.readline().strip()
    if first.startswith("t,y"):
        return read_sample_csv(file_path).y
    rows = []
    with open(file_path) as handle:
        for number, line in enumerate(handle, start=1):
            token = line.strip()
            if not token or (number == 1 and token == "y"):
                continue
            try:
                rows.append(float(token))
            except ValueError:
                raise ValueError(
                    f"{path}: line {number}: bad value '{token}'"
                ) from None
    if not rows:
        raise ValueError(f"{path}: no observations found")
    return np.asarray(rows)


def _cmd_test_garch(args) -> int:
    started = time.perf_counter()
    y = _load_series(args.data)
    levels = _parse_levels(args.levels)
    grid_spec = _parse_grid_flag(args.grid)
    grid = make_grid(grid_spec["grid_lower"], grid_spec["grid_upper"],
                     grid_spec["grid_coarseness"], len(y))
    methods = tuple(_split(args.methods))
    for m in methods:
        if m not in ("pvot", "randomized", "sup", "ave"):
            raise UsageError(f"unknown method '{m}'")
    cache = _cache_dir(args)
    table = None
    if cache:
        table = load_reference_table(cache, grid, args.table_truncation,
                                     args.table_replicates, args.seed)
    if table is None:
        table_rng = make_stream(args.seed, 1)
        table = simulate_null_reference(
            grid, args.table_truncation, args.table_replicates, table_rng)
        if cache:
            save_reference_table(table, cache, args.seed)
    rng = make_stream(args.seed, 0)
    path, failed = garch_stat_path(y, grid, rng)
    pvals = sim_pvalue_path(path, table)
    lam_idx = pick_randomized(grid, rng)
    reports = []
    for level in levels:
        for method in methods:
            if method == "pvot":
                reports.append(pvot_decide(occupation_time(pvals, level), level))
            elif method == "randomized":
                p = empirical_upper_pvalue(
                    float(path.values[lam_idx]), table.draws[:, lam_idx])
                reports.append(report_from_pvalue(p, level, "randomized"))
            else:
                p = sim_pvalue_transform(path, table, method)
                reports.append(report_from_pvalue(p, level, method))
    _print_reports(reports)
    if failed:
        print(f"note: {len(failed)} grid points kept best-probe fits")
    payload = {"data": str(args.data), "levels": list(levels),
               "grid": args.grid, "methods": list(methods),
               "table_replicates": args.table_replicates,
               "table_truncation": args.table_truncation, "seed": args.seed}
    _write_test_outputs(args, "test-garch", payload, grid, path.values,
                        pvals, reports, started)
    return 0


def _cmd_test_break(args) -> int:
    started = time.perf_counter()
    sample = read_sample_csv(args.data)
    levels = _parse_levels(args.levels)
    grid_spec = _parse_grid_flag(args.grid)
    grid = make_grid(grid_spec["grid_lower"], grid_spec["grid_upper"],
                     grid_spec["grid_coarseness"], sample.n)
    methods = tuple(_split(args.methods))
    for m in methods:
        if m not in ("pvot", "randomized"):
            raise UsageError(f"unknown method '{m}'")
    rng = make_stream(args.seed, 0)
    path = break_wald_path(sample, grid)
    pvals = break_pvalue_path(path, sample.x.shape[1])
    lam_idx = pick_randomized(grid, rng)
    reports = []
    for level in levels:
        for method in methods:
            if method == "pvot":
                reports.append(pvot_decide(occupation_time(pvals, level), level))
            else:
                reports.append(report_from_pvalue(
                    float(pvals.values[lam_idx]), level, "randomized"))
    _print_reports(reports)
    payload = {"data": str(args.data), "levels": list(levels),
               "grid": args.grid, "methods": list(methods), "seed": args.seed}
    _write_test_outputs(args, "test-break", payload, grid, path.values,
                        pvals, reports, started)
    return 0


def _cmd_mc(args) -> int:
    config = _resolve_experiment_config("mc", args)
    out_dir = Path(args.out)
    if config.experiment == "mc_funcform":
        summary = experiments.run_mc_funcform(config)
    else:
        summary = experiments.run_mc_garch(config, cache_dir=_cache_dir(args))
    csv_path = reporting.write_mc_summary_csv(summary, out_dir / "mc_summary.csv")
    reporting.write_manifest(
        out_dir, "mc", asdict(config), summary.config_hash, config.seed,
        [csv_path.name], {"wall_seconds": summary.wall_seconds},
    )
    print(f"{config.experiment}: {len(summary.rows)} summary rows "
          f"in {summary.wall_seconds:.1f}s")
    print(f"wrote {csv_path}")
    return 0


def _cmd_local_power(args) -> int:
    config = _resolve_experiment_config("local-power", args)
    out_dir = Path(args.out)
    result = experiments.run_local_power(config)
    written = reporting.write_power_curves_csv(result, out_dir)
    reporting.write_manifest(
        out_dir, "local-power", asdict(config), result.config_hash,
        config.seed, [p.name for p in written],
        {"wall_seconds": result.wall_seconds},
    )
    print(f"local_power: {len(result.rows)} power cells "
          f"in {result.wall_seconds:.1f}s")
    for p in written:
        print(f"wrote {p}")
    return 0


def _cmd_paths(args) -> int:
    started = time.perf_counter()
    config = _resolve_experiment_config("paths", args)
    out_dir = Path(args.out)
    written = experiments.emit_pvalue_paths(config, out_dir,
                                            cache_dir=_cache_dir(args))
    reporting.write_manifest(
        out_dir, "paths", asdict(config), config_hash(config), config.seed,
        [Path(p).name for p in written],
        {"wall_seconds": time.perf_counter() - started},
    )
    for p in written:
        print(f"wrote {p}")
    return 0


def _cmd_cache(args) -> int:
    cache = _cache_dir(args)
    if not cache:
        raise UsageError("no cache directory; pass --cache or set PVOT_CACHE_DIR")
    cache_path = Path(cache)
    if not cache_path.is_dir():
        print(f"cache directory '{cache}' does not exist")
        return 2
    sidecars = sorted(cache_path.glob("garch_null_*.json"))
    if not sidecars:
        print(f"no cached reference tables under {cache}")
        return 0
    for sidecar in sidecars:
        meta = json.loads(sidecar.read_text())
        table_file = sidecar.with_suffix(".csv")
        if args.clear:
            sidecar.unlink()
            if table_file.is_file():
                table_file.unlink()
            print(f"removed {meta['key']}")
        else:
            print(f"{meta['key']}: {meta['replicates']} draws, "
                  f"truncation {meta['truncation']}, "
                  f"{len(meta['points'])} grid points, seed {meta['seed']}")
    return 0


def _add_common_test_flags(sub, grid_default: str) -> None:
    sub.add_argument("--data", required=True, help="input CSV path")
    sub.add_argument("--levels", default=".01,.05,.10",
                     help="comma-separated test levels")
    sub.add_argument("--grid", default=grid_default,
                     help="nuisance grid as lower:upper:coarseness")
    sub.add_argument("--seed", type=int, default=0, help="master seed")
    sub.add_argument("--out", default=".", help="output directory")


def _add_experiment_flags(sub) -> None:
    sub.add_argument("--preset", help="configuration preset name")
    sub.add_argument("--config", help="INI config file or manifest.json")
    sub.add_argument("--set", action="append", metavar="KEY=VALUE",
                     help="override one config key")
    sub.add_argument("--levels", help="comma-separated test levels")
    sub.add_argument("--grid", help="nuisance grid as lower:upper:coarseness")
    sub.add_argument("--seed", type=int, help="master seed")
    sub.add_argument("--threads", type=int, help="worker thread bound")
    sub.add_argument("--out", default=".", help="output directory")


def build_parser() -> _Parser:
    parser = _Parser(prog="pvot",
                     description="Occupation-time hypothesis tests and "
                                 "their Monte Carlo studies.")
    commands = parser.add_subparsers(dest="command", required=True)

    sub = commands.add_parser("test-funcform", parents=[], add_help=True,
                              help="functional-form test on one dataset")
    _add_common_test_flags(sub, "0.0001:1:10")
    sub.add_argument("--methods", default="pvot,randomized,sup,ave,icm")
    sub.add_argument("--bootstrap", type=int, default=1000,
                     help="wild bootstrap replicates")
    sub.set_defaults(func=_cmd_test_funcform)

    sub = commands.add_parser("test-garch",
                              help="GARCH effects test on one series")
    _add_common_test_flags(sub, "0.01:0.99:1")
    sub.add_argument("--methods", default="pvot,randomized,sup,ave")
    sub.add_argument("--table-replicates", type=int, default=2000,
                     dest="table_replicates",
                     help="simulated null reference draws")
    sub.add_argument("--table-truncation", type=int, default=5000,
                     dest="table_truncation",
                     help="kernel series truncation length")
    sub.add_argument("--cache", help="reference table cache directory")
    sub.set_defaults(func=_cmd_test_garch)

    sub = commands.add_parser("test-break",
                              help="structural break test on one dataset")
    _add_common_test_flags(sub, "0.15:0.85:1")
    sub.add_argument("--methods", default="pvot,randomized")
    sub.set_defaults(func=_cmd_test_break)

    sub = commands.add_parser("mc", help="rejection-frequency study")
    _add_experiment_flags(sub)
    sub.add_argument("--cache", help="reference table cache directory")
    sub.set_defaults(func=_cmd_mc)

    sub = commands.add_parser("local-power", help="drifting-alternative study")
    _add_experiment_flags(sub)
    sub.set_defaults(func=_cmd_local_power)

    sub = commands.add_parser("paths", help="emit per-grid-point p-value CSVs")
    _add_experiment_flags(sub)
    sub.add_argument("--cache", help="reference table cache directory")
    sub.set_defaults(func=_cmd_paths)

    sub = commands.add_parser("cache", help="list or clear cached tables")
    sub.add_argument("--cache", help="cache directory (or PVOT_CACHE_DIR)")
    sub.add_argument("--clear", action="store_true",
                     help="delete every cached table")
    sub.set_defaults(func=_cmd_cache)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except ExperimentUnreliable as exc:
        print(f"experiment unreliable: {exc}", file=sys.stderr)
        return 3
    except PvotError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
