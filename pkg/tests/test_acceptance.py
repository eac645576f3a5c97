"""End-to-end acceptance checks at desk scale.

Each criterion prints one PASS/FAIL line with its measured numbers, even
under pytest capture, so a full run reads as a checklist.  The heavy
Monte Carlo results are computed once per session and shared.
"""

import math
import time

import numpy as np
import pytest

from pvot.breaks import break_fit_at
from pvot.cli import main
from pvot.core import PValuePath, occupation_time
from pvot.dgp import DgpSpec, Sample, gen_garch, make_stream
from pvot.experiments import (
    ExperimentConfig,
    preset_config,
    run_local_power,
    run_mc_funcform,
    run_mc_garch,
)
from pvot.funcform import lm_stat_path, ols_fit
from pvot.garch import GarchSpace, garch_objective, qml_fit, simulate_kernel_draws
from pvot.grid import NuisanceGrid, make_grid, make_grid_points


def report(capsys, label, ok, detail):
    with capsys.disabled():
        print(f"\n[{label}] {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, f"{label}: {detail}"


@pytest.fixture(scope="module")
def local_power_result():
    return run_local_power(preset_config("desk-local-power"))


@pytest.fixture(scope="module")
def funcform_summary():
    config = ExperimentConfig(
        experiment="mc_funcform", replications=1000, seed=0,
        levels=(0.01, 0.05), sample_sizes=(250, 500),
        dgps=("iid_linear", "iid_quadratic"),
        methods=("pvot", "randomized", "icm"), grid_coarseness=10.0,
    )
    return run_mc_funcform(config)


@pytest.fixture(scope="module")
def garch_summary():
    return run_mc_garch(preset_config("desk-garch"))


def test_criterion_1_local_power_size_anchors(local_power_result, capsys):
    # The pvot anchor here is not reachable: drawing the limit process
    # exactly (Gaussian, correlation exp(-(a-b)^2/2)) puts the zero-drift
    # occupation rejection rate at .090 +/- .001, because band exits are
    # rare on a kernel this smooth but the excursions are long.  The
    # oracle lives in test_experiments; the decision record under notes/
    # walks through the measurements.  The other anchors hold.
    result = local_power_result
    sizes = {m: result.power(m, 0.05, 0.0).power
             for m in ("pvot", "ave", "sup", "randomized", "icm")}
    checks = [
        abs(sizes["pvot"] - 0.050) <= 0.020,
        abs(sizes["ave"] - 0.050) <= 0.020,
        abs(sizes["sup"] - 0.050) <= 0.020,
        abs(sizes["randomized"] - 0.051) <= 0.020,
        sizes["icm"] <= 0.05 and abs(sizes["icm"] - 0.0365) <= 0.025,
        result.wall_seconds <= 600.0,
    ]
    detail = (
        f"b=0 rejection rates pvot={sizes['pvot']:.4f} ave={sizes['ave']:.4f} "
        f"sup={sizes['sup']:.4f} randomized={sizes['randomized']:.4f} "
        f"icm={sizes['icm']:.4f}, run took {result.wall_seconds:.0f}s"
    )
    report(capsys, "criterion 1: local-power size anchors", all(checks), detail)


def test_criterion_2_local_power_monotone(local_power_result, capsys):
    result = local_power_result
    drifts = (0.0, 1.0, 2.0, 3.0, 5.0, 7.0)
    worst = []
    tail = {}
    ok = True
    for method in ("pvot", "ave", "sup", "randomized", "icm"):
        rows = [result.power(method, 0.05, b) for b in drifts]
        for prev, cur in zip(rows, rows[1:]):
            slack = 2.0 * math.hypot(prev.se, cur.se)
            if cur.power < prev.power - slack:
                ok = False
                worst.append(f"{method} drops at b={cur.b:g}")
        tail[method] = rows[-1].power
        if rows[-1].power < 0.95:
            ok = False
            worst.append(f"{method} power at b=7 is {rows[-1].power:.3f}")
    detail = ("power at b=7: "
              + " ".join(f"{m}={p:.4f}" for m, p in tail.items())
              + (f"; violations: {'; '.join(worst)}" if worst else
                 "; all curves nondecreasing within 2 SE"))
    report(capsys, "criterion 2: local-power monotonicity", ok, detail)


def test_criterion_3_funcform_spot_values(funcform_summary, capsys):
    summary = funcform_summary
    size = summary.find("pvot", "iid_linear", 250, 0.05).freq
    power = summary.find("pvot", "iid_quadratic", 500, 0.05).freq
    icm = summary.find("icm", "iid_linear", 250, 0.01).freq
    checks = [
        abs(size - 0.044) <= 0.021,
        abs(power - 0.584) <= 0.06,
        icm <= 0.02,
        summary.wall_seconds <= 900.0,
    ]
    detail = (
        f"pvot size (linear, n=250, 5%) = {size:.4f} vs .044 +/- .021; "
        f"pvot power (quadratic, n=500, 5%) = {power:.4f} vs .584 +/- .06; "
        f"icm size (linear, n=250, 1%) = {icm:.4f} <= .02; "
        f"run took {summary.wall_seconds:.0f}s"
    )
    report(capsys, "criterion 3: rejection-table spot values", all(checks),
           detail)


def test_criterion_4a_garch_pvot_size(garch_summary, capsys):
    row = garch_summary.find("pvot", "garch_delta0", 250, 0.05)
    ok = (abs(row.freq - 0.059) <= 0.045
          and garch_summary.wall_seconds <= 1800.0)
    detail = (f"pvot size (n=250, 5%) = {row.freq:.4f} vs .059 +/- .045; "
              f"run took {garch_summary.wall_seconds:.0f}s")
    report(capsys, "criterion 4a: garch pvot size", ok, detail)


def test_criterion_4b_garch_pvot_power(garch_summary, capsys):
    row = garch_summary.find("pvot", "garch_delta0.3", 250, 0.05)
    detail = f"pvot power (delta=.3, n=250, 5%) = {row.freq:.4f}, need >= .90"
    report(capsys, "criterion 4b: garch pvot power", row.freq >= 0.90, detail)


def test_criterion_4c_garch_sup_oversize(garch_summary, capsys):
    # Negative control: the reference study reports a heavily oversized sup
    # test (.188 at n=250).  Our estimator keeps the intercept box slack, and
    # without the boundary clipping that inflated those paths the sup test
    # is close to nominal, so this reproduction target is not reachable; the
    # decision record under notes/ walks through the measurements.
    row = garch_summary.find("sup", "garch_delta0", 250, 0.05)
    detail = (f"sup size (n=250, 5%) = {row.freq:.4f}, reproduction target "
              ">= .10 not reached; near-nominal sup is expected here")
    report(capsys, "criterion 4c: garch sup oversize control", row.freq >= 0.10,
           detail)


def test_criterion_5_kernel_moments(capsys):
    started = time.perf_counter()
    pts = np.array([0.2, 0.5, 0.8])
    grid = NuisanceGrid(pts, 0.2, 0.8, 1.0 / 3.0)
    draws = simulate_kernel_draws(grid, 2000, 20_000, make_stream(0, 900))
    elapsed = time.perf_counter() - started
    variances = np.var(draws, axis=0)
    targets = 1.0 - pts * pts
    cov = float(np.cov(draws[:, 0], draws[:, 2])[0, 1])
    cov_target = (1 - 0.04) * (1 - 0.64) / (1 - 0.16)
    ok = (np.all(np.abs(variances - targets) <= 0.02)
          and abs(cov - cov_target) <= 0.02
          and elapsed <= 60.0)
    detail = (
        "variance at (.2,.5,.8) = ("
        + ", ".join(f"{v:.4f}" for v in variances)
        + f") vs ({', '.join(f'{t:.2f}' for t in targets)}); "
        f"cov(.2,.8) = {cov:.4f} vs {cov_target:.4f}; {elapsed:.1f}s"
    )
    report(capsys, "criterion 5: kernel moment suite", ok, detail)


def funcform_oracle_stat(sample, lam):
    x = sample.x[:, 0]
    n = sample.n
    gram = sum(v * v for v in x) / n
    beta = sum(xv * yv for xv, yv in zip(x, sample.y)) / n / gram
    resid = [yv - beta * xv for xv, yv in zip(x, sample.y)]
    xbar = sum(x) / n
    weights = [1.0 / (1.0 + math.exp(lam * math.atan(xv - xbar))) for xv in x]
    moment = sum(r * w for r, w in zip(resid, weights)) / math.sqrt(n)
    proj = sum(xv * w for xv, w in zip(x, weights)) / (n * gram)
    adjusted = [w - xv * proj for w, xv in zip(weights, x)]
    var = sum(r * r * a * a for r, a in zip(resid, adjusted)) / n
    return moment * moment / var


def garch_oracle_objective(y, omega, delta, lam):
    s2_prev = omega / (1.0 - lam)
    y2_prev = 0.0
    terms = []
    for value in y:
        s2 = omega + delta * y2_prev + lam * s2_prev
        terms.append(math.log(s2) + value * value / s2)
        s2_prev = s2
        y2_prev = value * value
    return math.fsum(terms)


def break_oracle_wald(sample, fraction):
    n = sample.n
    split = int(np.floor(fraction * n + 0.5))
    x_pre, x_post = sample.x[:split], sample.x[split:]
    y_pre, y_post = sample.y[:split], sample.y[split:]
    beta_pre = np.linalg.lstsq(x_pre, y_pre, rcond=None)[0]
    beta_post = np.linalg.lstsq(x_post, y_post, rcond=None)[0]
    ssr = (np.sum((y_pre - x_pre @ beta_pre) ** 2)
           + np.sum((y_post - x_post @ beta_post) ** 2))
    spread = ssr / n * (np.linalg.inv(x_pre.T @ x_pre)
                        + np.linalg.inv(x_post.T @ x_post))
    diff = beta_pre - beta_post
    return float(diff @ np.linalg.inv(spread) @ diff)


def test_criterion_6_oracle_suites(capsys):
    rng = make_stream(0, 600)

    # Occupation times against a per-point counting loop, exact.
    grid = make_grid(0.0001, 1.0, 2.0, 100)
    occupation_exact = True
    for _ in range(100):
        pvals = rng.uniform(size=len(grid))
        path = PValuePath(grid, pvals)
        for level in (0.01, 0.05, 0.10, 0.5):
            brute = grid.cell_measure * sum(1 for p in pvals if p < level)
            occupation_exact &= occupation_time(path, level) == brute

    # Functional-form pipeline against longhand formulas.
    ff_grid = make_grid_points(0.0001, 1.0, 8)
    ff_err = 0.0
    for _ in range(20):
        n = int(rng.integers(5, 11))
        x = rng.standard_normal(n)
        y = 2.0 * x + rng.standard_normal(n)
        sample = Sample(y, x, n)
        path, _ = lm_stat_path(sample, ols_fit(sample), ff_grid)
        for lam, got in zip(ff_grid.points, path.values):
            ff_err = max(ff_err, abs(got - funcform_oracle_stat(sample, lam)))

    # GARCH criterion against a literal recursion.
    garch_err = 0.0
    for _ in range(10):
        n = int(rng.integers(10, 51))
        y = rng.standard_normal(n) * 1.5
        for omega, delta, lam in [(1.0, 0.0, 0.6), (0.4, 0.3, 0.2),
                                  (2.0, 0.15, 0.9)]:
            got = garch_objective(y, omega, delta, lam)
            garch_err = max(garch_err,
                            abs(got - garch_oracle_objective(y, omega, delta,
                                                             lam)))

    # QML against a 50-by-50 grid search on null data.
    space = GarchSpace()
    oms = np.linspace(space.omega_bounds[0], space.omega_bounds[1], 50)
    des = np.linspace(space.delta_bounds[0], space.delta_bounds[1], 50)
    lams = (0.1, 0.3, 0.5, 0.6, 0.7, 0.9, 0.2, 0.4, 0.8, 0.6)
    qml_gap = -np.inf
    for i, lam in enumerate(lams):
        y = gen_garch(DgpSpec("garch"), 250, make_stream(0, 700 + i)).y
        fit = qml_fit(y, lam, make_stream(0, 750 + i), space)
        best_probe = min(garch_objective(y, om, de, lam)
                         for om in oms for de in des)
        qml_gap = max(qml_gap, fit.objective - best_probe)

    # Break Wald against a two-regression evaluation.
    break_err = 0.0
    for _ in range(20):
        n = int(rng.integers(40, 90))
        x = rng.standard_normal((n, 1))
        y = 1.5 * x[:, 0] + rng.standard_normal(n)
        sample = Sample(y, x, n)
        for fraction in (0.3, 0.5, 0.7):
            got = break_fit_at(sample, fraction).wald
            break_err = max(break_err,
                            abs(got - break_oracle_wald(sample, fraction)))

    ok = (occupation_exact and ff_err <= 1e-10 and garch_err <= 1e-12
          and qml_gap <= 1e-6 and break_err <= 1e-9)
    detail = (
        f"occupation exact on 100 paths: {occupation_exact}; "
        f"funcform max err {ff_err:.2e} (<= 1e-10); "
        f"garch recursion max err {garch_err:.2e} (<= 1e-12); "
        f"qml worst gap to grid search {qml_gap:.2e} (<= 1e-6); "
        f"break max err {break_err:.2e} (<= 1e-9)"
    )
    report(capsys, "criterion 6: oracle suites", ok, detail)


def test_criterion_7_byte_identical_reruns(tmp_path, capsys):
    mc_base = [
        "mc", "--preset", "desk-funcform",
        "--set", "replications=100", "--set", "sample_sizes=60",
        "--set", "dgps=iid_linear", "--set", "methods=pvot,randomized,icm",
        "--set", "grid_coarseness=1", "--levels", ".05", "--seed", "11",
    ]
    outs = [tmp_path / name for name in ("mc1", "mc2", "mc3")]
    assert main(mc_base + ["--threads", "1", "--out", str(outs[0])]) == 0
    assert main(mc_base + ["--threads", "2", "--out", str(outs[1])]) == 0
    assert main(mc_base + ["--threads", "1", "--out", str(outs[2])]) == 0
    mc_bytes = [(out / "mc_summary.csv").read_bytes() for out in outs]
    mc_identical = mc_bytes[0] == mc_bytes[1] == mc_bytes[2]

    lp_base = [
        "local-power", "--set", "replications=100",
        "--set", "power_draws=200", "--set", "grid_points=50",
        "--set", "drifts=0,7", "--seed", "12",
    ]
    lp_outs = [tmp_path / name for name in ("lp1", "lp2")]
    assert main(lp_base + ["--threads", "1", "--out", str(lp_outs[0])]) == 0
    assert main(lp_base + ["--threads", "2", "--out", str(lp_outs[1])]) == 0
    lp_bytes = [(out / "power_curves_0p05.csv").read_bytes()
                for out in lp_outs]
    lp_identical = lp_bytes[0] == lp_bytes[1]

    ok = mc_identical and lp_identical
    detail = (f"mc summary identical across threads 1/2/rerun: {mc_identical}; "
              f"power curves identical across threads 1/2: {lp_identical}")
    report(capsys, "criterion 7: deterministic reruns", ok, detail)
