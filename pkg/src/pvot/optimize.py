"""Derivative-free-input minimization over a box via projected quasi-Newton.

The caller supplies only the objective; gradients come from central finite
differences with a relative step, falling back to one-sided differences at
an active bound.  Steps are projected back into the box, and the iteration
stops once either the projected gradient or the parameter step drops below
the tolerance.  The returned point is the best point ever evaluated, so it
can never be worse than any probe retained along the way.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_ARMIJO = 1e-4
_MIN_STEP = 1e-12


@dataclass
class BoxResult:
    x: np.ndarray
    value: float
    converged: bool
    iterations: int
    stop_reason: str


class _Tracker:
    """Wraps the objective and remembers the best probe seen."""

    def __init__(self, fun):
        self._fun = fun
        self.best_x = None
        self.best_value = np.inf

    def __call__(self, x: np.ndarray) -> float:
        value = float(self._fun(x))
        if np.isnan(value):
            value = np.inf
        if value < self.best_value:
            self.best_value = value
            self.best_x = x.copy()
        return value


def _fd_gradient(fun, x, lower, upper, rel_step):
    """Central finite differences, one-sided where a bound blocks a probe."""
    grad = np.zeros_like(x)
    fx = None
    for j in range(len(x)):
        h = rel_step * max(1.0, abs(x[j]))
        up = min(h, upper[j] - x[j])
        down = min(h, x[j] - lower[j])
        if up < 1e-3 * h and down < 1e-3 * h:
            continue
        if up < 1e-3 * h:
            up = 0.0
        if down < 1e-3 * h:
            down = 0.0
        if up > 0:
            xp = x.copy()
            xp[j] += up
            fp = fun(xp)
        else:
            if fx is None:
                fx = fun(x)
            fp, up = fx, 0.0
        if down > 0:
            xm = x.copy()
            xm[j] -= down
            fm = fun(xm)
        else:
            if fx is None:
                fx = fun(x)
            fm, down = fx, 0.0
        grad[j] = (fp - fm) / (up + down)
    return grad


def minimize_box(fun, x0, lower, upper, *, tol: float = 1e-4,
                 rel_step: float = 1e-6, max_iter: int = 500) -> BoxResult:
    """Minimize fun over {x : lower <= x <= upper} starting from x0.

    Parameters
    ----------
    fun : callable
        Objective mapping a parameter vector to a float.
    x0 : array_like
        Start point; projected into the box before use.
    lower, upper : array_like
        Elementwise bounds, lower < upper.
    tol : float
        Threshold for both projected gradient norm and parameter step.
    rel_step : float
        Relative finite-difference step.
    max_iter : int
        Iteration cap; hitting it returns converged=False.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if np.any(lower >= upper):
        raise ValueError("need lower < upper in every coordinate")
    track = _Tracker(fun)
    x = np.clip(np.asarray(x0, dtype=float), lower, upper)
    fx = track(x)
    dim = len(x)
    hinv = np.eye(dim)
    grad = _fd_gradient(track, x, lower, upper, rel_step)
    converged = False
    reason = "maxiter"
    iterations = 0
    for iterations in range(1, max_iter + 1):
        projected = x - np.clip(x - grad, lower, upper)
        if np.max(np.abs(projected)) < tol:
            converged, reason = True, "gradient"
            break
        direction = -hinv @ grad
        if float(grad @ direction) >= 0.0:
            direction = -grad
            hinv = np.eye(dim)
        step = 1.0
        x_new = None
        while step > _MIN_STEP:
            candidate = np.clip(x + step * direction, lower, upper)
            moved = candidate - x
            if np.any(moved != 0.0):
                f_cand = track(candidate)
                slope = float(grad @ moved)
                if f_cand < fx and f_cand <= fx + _ARMIJO * min(slope, 0.0):
                    x_new, f_new = candidate, f_cand
                    break
            step *= 0.5
        if x_new is None:
            if np.array_equal(direction, -grad):
                reason = "linesearch"
                break
            hinv = np.eye(dim)
            direction = -grad
            step = 1.0
            while step > _MIN_STEP:
                candidate = np.clip(x + step * direction, lower, upper)
                moved = candidate - x
                if np.any(moved != 0.0):
                    f_cand = track(candidate)
                    if f_cand < fx:
                        x_new, f_new = candidate, f_cand
                        break
                step *= 0.5
            if x_new is None:
                reason = "linesearch"
                break
        grad_new = _fd_gradient(track, x_new, lower, upper, rel_step)
        if np.max(np.abs(x_new - x)) < tol:
            x, fx, grad = x_new, f_new, grad_new
            converged, reason = True, "step"
            break
        s = x_new - x
        delta_g = grad_new - grad
        curve = float(s @ delta_g)
        if curve > 1e-10 * np.linalg.norm(s) * np.linalg.norm(delta_g):
            rho = 1.0 / curve
            outer_sy = np.outer(s, delta_g)
            hinv = (
                (np.eye(dim) - rho * outer_sy) @ hinv @ (np.eye(dim) - rho * outer_sy.T)
                + rho * np.outer(s, s)
            )
        else:
            hinv = np.eye(dim)
        x, fx, grad = x_new, f_new, grad_new
    return BoxResult(
        x=track.best_x.copy(),
        value=track.best_value,
        converged=converged,
        iterations=iterations,
        stop_reason=reason,
    )
