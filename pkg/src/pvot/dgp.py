"""Simulated data generators and reproducible random streams.

Every consumer of randomness receives its own generator built from a
master seed plus an integer task id, so replications can run in any order
(or in parallel) and still reproduce bit-for-bit.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BadDgp

# Draws used for the Monte Carlo stationarity screen of a GARCH spec,
# with its own fixed seed so screening never disturbs caller streams.
_STATIONARITY_DRAWS = 100_000
_STATIONARITY_SEED = 414_213_562
_stationarity_cache: dict[tuple[float, float], float] = {}

_DGP_DEFAULTS = {
    "iid_linear": {"beta": 2.0},
    "iid_quadratic": {"beta": 2.0, "quad": 0.1},
    "ar1": {"ar": 0.9},
    "setar": {"ar": 0.9, "shift": -0.4},
    "garch": {"omega": 1.0, "delta": 0.0, "lam": 0.6},
}


def make_stream(master_seed: int, task_id: int) -> np.random.Generator:
    """Independent generator for one task under one master seed.

    Streams for distinct (master_seed, task_id) pairs never overlap, and
    the same pair always reproduces the same draws regardless of how many
    other streams exist or in what order they run.
    """
    if task_id < 0:
        raise ValueError(f"task_id must be nonnegative, got {task_id}")
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(task_id),))
    return np.random.default_rng(seq)


def _garch_log_moment(delta: float, lam: float) -> float:
    """Monte Carlo estimate of E[ln(delta*eps^2 + lam)], eps standard normal."""
    key = (float(delta), float(lam))
    if key not in _stationarity_cache:
        rng = np.random.default_rng(_STATIONARITY_SEED)
        eps = rng.standard_normal(_STATIONARITY_DRAWS)
        _stationarity_cache[key] = float(np.mean(np.log(delta * eps * eps + lam)))
    return _stationarity_cache[key]


@dataclass(frozen=True)
class DgpSpec:
    """A named generator with its parameter values.

    Unspecified parameters take the defaults of the kind; unknown kinds or
    parameters outside their admissible region raise BadDgp.
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in _DGP_DEFAULTS:
            raise BadDgp(
                f"unknown dgp kind '{self.kind}'; known: {sorted(_DGP_DEFAULTS)}"
            )
        merged = dict(_DGP_DEFAULTS[self.kind])
        for name, value in self.params.items():
            if name not in merged:
                raise BadDgp(f"dgp '{self.kind}' has no parameter '{name}'")
            merged[name] = float(value)
        object.__setattr__(self, "params", merged)
        if self.kind in ("ar1", "setar") and abs(merged["ar"]) >= 1:
            raise BadDgp(f"autoregressive root {merged['ar']} is not stable")
        if self.kind == "garch":
            omega, delta, lam = merged["omega"], merged["delta"], merged["lam"]
            if omega <= 0:
                raise BadDgp(f"garch omega must be positive, got {omega}")
            if delta < 0 or lam < 0 or lam >= 1:
                raise BadDgp(f"garch needs delta >= 0 and 0 <= lam < 1, got {merged}")
            if _garch_log_moment(delta, lam) >= 0:
                raise BadDgp(
                    f"garch spec {merged} fails the stationarity screen "
                    "E[ln(delta*eps^2 + lam)] < 0"
                )


@dataclass(frozen=True, eq=False)
class Sample:
    """Aligned response and regressor rows of one drawn dataset."""

    y: np.ndarray
    x: np.ndarray
    n: int

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)
        if y.shape != (self.n,) or x.shape[0] != self.n:
            raise ValueError(
                f"sample of n={self.n} got y{y.shape} and x{x.shape}"
            )
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(x))):
            raise ValueError("sample contains non-finite values")


def _threshold_ar_path(eps: np.ndarray, ar: float, shift: float,
                       y_start: float | None = None) -> np.ndarray:
    """Path y_t = ar*y_{t-1} + shift*y_{t-1}*1(y_{t-1} > 0) + eps_t, y_1 = eps_1."""
    path = np.empty(len(eps))
    prev = eps[0] if y_start is None else y_start
    path[0] = prev
    for t in range(1, len(eps)):
        drift = ar * prev
        if shift != 0.0 and prev > 0.0:
            drift += shift * prev
        prev = drift + eps[t]
        path[t] = prev
    return path


def gen_sample(spec: DgpSpec, n: int, rng: np.random.Generator) -> Sample:
    """Draw one dataset of size n from a generator spec.

    The iid kinds draw regressors first, then shocks.  Autoregressive
    kinds draw 2n shocks, run the recursion from y_1 = eps_1, and keep the
    last n observations so the retained stretch has forgotten the start;
    their regressor column holds the lagged response.
    """
    if n < 1:
        raise ValueError(f"sample size must be positive, got {n}")
    p = spec.params
    if spec.kind in ("iid_linear", "iid_quadratic"):
        x = rng.standard_normal(n)
        eps = rng.standard_normal(n)
        y = p["beta"] * x + eps
        if spec.kind == "iid_quadratic":
            y = y + p["quad"] * x * x
        return Sample(y, x, n)
    if spec.kind in ("ar1", "setar"):
        eps = rng.standard_normal(2 * n)
        shift = p["shift"] if spec.kind == "setar" else 0.0
        path = _threshold_ar_path(eps, p["ar"], shift)
        return Sample(path[n:], path[n - 1:2 * n - 1], n)
    if spec.kind == "garch":
        return gen_garch(spec, n, rng)
    raise BadDgp(f"gen_sample cannot draw from kind '{spec.kind}'")


def gen_garch(spec: DgpSpec, n: int, rng: np.random.Generator) -> Sample:
    """Draw a conditionally heteroskedastic series of length n.

    The variance recursion starts from its null stationary value
    omega/(1-lam); one presample observation seeds the lagged response so
    the returned regressor column is the lagged series with 0 in front.
    """
    if spec.kind != "garch":
        raise BadDgp(f"gen_garch needs a garch spec, got '{spec.kind}'")
    if n < 1:
        raise ValueError(f"sample size must be positive, got {n}")
    omega, delta, lam = (spec.params[k] for k in ("omega", "delta", "lam"))
    eps = rng.standard_normal(n + 1)
    s2 = omega / (1.0 - lam)
    y_prev = np.sqrt(s2) * eps[0]
    y = np.empty(n)
    for t in range(n):
        s2 = omega + delta * y_prev * y_prev + lam * s2
        y_prev = np.sqrt(s2) * eps[t + 1]
        y[t] = y_prev
    x = np.empty(n)
    x[0] = 0.0
    x[1:] = y[:-1]
    return Sample(y, x, n)


def write_sample_csv(sample: Sample, path: str | Path) -> None:
    """Write a sample as t,y,x1..xk with full double precision."""
    path = Path(path)
    k = sample.x.shape[1]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "y"] + [f"x{j + 1}" for j in range(k)])
        for i in range(sample.n):
            row = [str(i + 1), f"{sample.y[i]:.17g}"]
            row += [f"{sample.x[i, j]:.17g}" for j in range(k)]
            writer.writerow(row)


def read_sample_csv(path: str | Path) -> Sample:
    """Read a t,y,x1..xk file back into a Sample.

    Raises ValueError naming the offending token for malformed content.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if len(header) < 2 or header[0] != "t" or header[1] != "y":
            raise ValueError(
                f"{path}: header must start with 't,y', got {','.join(header)}"
            )
        k = len(header) - 2
        ys: list[float] = []
        xs: list[list[float]] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2 + k:
                raise ValueError(
                    f"{path}:{lineno}: expected {2 + k} fields, got {len(row)}"
                )
            for token in row[1:]:
                try:
                    float(token)
                except ValueError:
                    raise ValueError(
                        f"{path}:{lineno}: bad numeric token '{token}'"
                    ) from None
            ys.append(float(row[1]))
            xs.append([float(v) for v in row[2:]])
    if not ys:
        raise ValueError(f"{path}: no data rows")
    x = np.asarray(xs) if k else np.zeros((len(ys), 0))
    return Sample(np.asarray(ys), x, len(ys))
