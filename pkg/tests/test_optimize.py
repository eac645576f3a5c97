import numpy as np
import pytest

from pvot.optimize import minimize_box


def test_unconstrained_quadratic():
    res = minimize_box(
        lambda x: float((x[0] - 1.5) ** 2 + (x[1] + 0.5) ** 2),
        [0.0, 0.0], [-5.0, -5.0], [5.0, 5.0],
    )
    assert res.converged
    assert res.x == pytest.approx([1.5, -0.5], abs=1e-3)
    assert res.value == pytest.approx(0.0, abs=1e-6)


def test_minimum_on_box_face():
    # Unconstrained minimum at x = 3 sits outside the box; the solution is
    # pinned to the upper bound.
    res = minimize_box(lambda x: float((x[0] - 3.0) ** 2), [0.5], [0.0], [1.0])
    assert res.converged
    assert res.x[0] == pytest.approx(1.0, abs=1e-6)


def test_minimum_at_box_corner():
    res = minimize_box(
        lambda x: float(x[0] + 2.0 * x[1]),
        [0.5, 0.5], [0.0, 0.0], [1.0, 1.0],
    )
    assert res.converged
    assert res.x == pytest.approx([0.0, 0.0], abs=1e-6)


def test_anisotropic_quadratic():
    scales = np.array([100.0, 1.0, 0.01])
    target = np.array([0.3, -1.2, 2.0])

    def fun(x):
        return float(scales @ (x - target) ** 2)

    res = minimize_box(fun, [0.0, 0.0, 0.0], [-5.0] * 3, [5.0] * 3, max_iter=2000)
    assert res.converged
    assert res.x[:2] == pytest.approx(target[:2], abs=1e-2)


def test_rosenbrock_in_box():
    def fun(x):
        return float(100.0 * (x[1] - x[0] ** 2) ** 2 + (1.0 - x[0]) ** 2)

    res = minimize_box(fun, [-1.2, 1.0], [-2.0, -2.0], [2.0, 2.0],
                       tol=1e-6, max_iter=5000)
    assert res.x == pytest.approx([1.0, 1.0], abs=1e-2)


def test_returns_best_probe_ever_seen():
    seen = []

    def fun(x):
        value = float((x[0] - 0.7) ** 2)
        seen.append((x[0], value))
        return value

    res = minimize_box(fun, [0.0], [0.0], [1.0])
    best = min(v for _, v in seen)
    assert res.value == best


def test_nan_objective_treated_as_infinite():
    def fun(x):
        if x[0] > 0.6:
            return float("nan")
        return float((x[0] - 0.5) ** 2)

    res = minimize_box(fun, [0.2], [0.0], [1.0])
    assert np.isfinite(res.value)
    assert res.x[0] <= 0.6


def test_flat_objective_stops_without_progress():
    res = minimize_box(lambda x: 1.0, [0.5], [0.0], [1.0])
    assert res.stop_reason in ("gradient", "linesearch")
    assert res.value == 1.0


def test_stop_reasons_are_named():
    res = minimize_box(lambda x: float(x[0] ** 2), [0.9], [-1.0], [1.0])
    assert res.stop_reason in ("gradient", "step")
    capped = minimize_box(lambda x: float(x[0] ** 2), [0.9], [-1.0], [1.0],
                          tol=1e-14, max_iter=3)
    assert capped.iterations <= 3
    if not capped.converged:
        assert capped.stop_reason in ("maxiter", "linesearch")


def test_start_outside_box_is_projected():
    res = minimize_box(lambda x: float((x[0] - 0.4) ** 2), [9.0], [0.0], [1.0])
    assert res.converged
    assert res.x[0] == pytest.approx(0.4, abs=1e-3)


def test_rejects_inverted_bounds():
    with pytest.raises(ValueError):
        minimize_box(lambda x: 0.0, [0.5], [1.0], [0.0])
