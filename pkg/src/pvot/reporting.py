"""CSV and manifest emission.

All numeric cells use 17 significant digits so files round-trip doubles
exactly, and nothing time-dependent goes into a CSV; a rerun with the same
configuration and seed reproduces every data file byte for byte.  Wall
times and library versions belong to the manifest only.
"""

from __future__ import annotations

import json
import platform
from pathlib import Path


def fmt(value) -> str:
    """Full-precision text for a float, plain text for anything else."""
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def write_csv(path: str | Path, header: list[str], rows: list[tuple],
              comments: list[str] | None = None) -> Path:
    """Write rows with a header and optional leading '#' comment lines."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# {text}" for text in (comments or [])]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(fmt(cell) for cell in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def run_comments(config_digest: str, seed: int) -> list[str]:
    return [f"config_hash={config_digest} seed={seed}"]


def write_mc_summary_csv(summary, path: str | Path) -> Path:
    """Rejection-frequency table: method,dgp,n,level,freq,se,reps,failures."""
    rows = [
        (r.method, r.dgp, r.n, r.level, r.freq, r.se, r.reps, r.failures)
        for r in summary.rows
    ]
    return write_csv(
        path,
        ["method", "dgp", "n", "level", "freq", "se", "reps", "failures"],
        rows,
        run_comments(summary.config_hash, summary.seed),
    )


def write_power_curves_csv(result, out_dir: str | Path) -> list[Path]:
    """One file per level with columns method,b,power,se."""
    out_dir = Path(out_dir)
    levels = sorted({row.level for row in result.rows})
    written = []
    for level in levels:
        token = f"{level:g}".replace(".", "p")
        rows = [
            (r.method, r.b, r.power, r.se)
            for r in result.rows
            if abs(r.level - level) < 1e-9
        ]
        written.append(write_csv(
            out_dir / f"power_curves_{token}.csv",
            ["method", "b", "power", "se"],
            rows,
            run_comments(result.config_hash, result.seed)
            + [f"level={level:g} replications={result.replications}"],
        ))
    return written


def write_path_csv(path: str | Path, lam, stats, pvalues,
                   comments: list[str]) -> Path:
    """Per-grid-point file: lambda,stat,pvalue (stat column optional)."""
    if stats is None:
        header = ["lambda", "pvalue"]
        rows = list(zip(lam, pvalues))
    else:
        header = ["lambda", "stat", "pvalue"]
        rows = list(zip(lam, stats, pvalues))
    return write_csv(path, header, rows, comments)


def write_manifest(out_dir: str | Path, command: str, config_payload: dict,
                   config_digest: str, seed: int, outputs: list[str],
                   timings: dict) -> Path:
    """Record what produced the outputs: config, seed, versions, timings."""
    import numpy
    import scipy

    from . import __version__

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "config": config_payload,
        "config_hash": config_digest,
        "seed": seed,
        "versions": {
            "python": platform.python_version(),
            "numpy": numpy.__version__,
            "scipy": scipy.__version__,
            "pvot": __version__,
        },
        "timings": timings,
        "outputs": outputs,
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path
