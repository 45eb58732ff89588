"""L-BFGS with restart-on-numerical-failure semantics.

A standard two-loop-recursion L-BFGS minimizer with a strong-Wolfe cubic
line search, plus one non-standard behaviour that the GP training loops rely
on: whenever an objective evaluation produces a non-finite value or gradient
(or raises :class:`~sgpbench.errors.NonFiniteObjective`), the trial point is
discarded, the curvature history is cleared, the implicit Hessian resets to
an identity scaling, and optimization resumes from the last accepted iterate.
Line searches often query extreme hyperparameter values; resetting the
optimizer state steers it along a fresh, more conservative direction instead
of crashing the run.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidStart, NonFiniteObjective

__all__ = ["LbfgsConfig", "OptResult", "minimize",
           "GRAD_TOL", "MAX_ITERS", "LINE_SEARCH_STALL", "RESTARTS_EXHAUSTED"]

GRAD_TOL = "grad_tol"
MAX_ITERS = "max_iters"
LINE_SEARCH_STALL = "line_search_stall"
RESTARTS_EXHAUSTED = "restarts_exhausted"


@dataclass(frozen=True)
class LbfgsConfig:
    memory_pairs: int = 10
    max_iterations: int = 1000
    grad_tol: float = 1e-6  # infinity norm, unconstrained space
    max_restarts: int = 5
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.9
    max_line_search_steps: int = 25

    def __post_init__(self):
        if min(self.memory_pairs, self.max_iterations, self.max_restarts,
               self.max_line_search_steps) < 1:
            raise ValueError("all counts must be >= 1")
        if not 0.0 < self.wolfe_c1 < self.wolfe_c2 < 1.0:
            raise ValueError("need 0 < c1 < c2 < 1")


@dataclass(frozen=True)
class OptResult:
    x_final: np.ndarray
    f_final: float
    grad_norm_final: float
    iterations: int
    restarts_used: int
    termination: str


class _SafeObjective:
    """Evaluate the raw objective, mapping every failure mode to None."""

    def __init__(self, objective):
        self.objective = objective
        self.evaluations = 0

    def __call__(self, x):
        self.evaluations += 1
        try:
            value, grad = self.objective(x)
        except NonFiniteObjective:
            return None
        grad = np.asarray(grad, dtype=float)
        if not np.isfinite(value) or not np.all(np.isfinite(grad)):
            return None
        return float(value), grad


def _two_loop_direction(grad, history):
    q = grad.copy()
    alphas = []
    for s, y, rho in reversed(history):
        a = rho * float(s @ q)
        q -= a * y
        alphas.append(a)
    s_last, y_last, _ = history[-1]
    gamma = float(s_last @ y_last) / float(y_last @ y_last)
    r = gamma * q
    for (s, y, rho), a in zip(history, reversed(alphas)):
        b = rho * float(y @ r)
        r += s * (a - b)
    return -r


def _cubic_step(a_lo, f_lo, g_lo, a_hi, f_hi, g_hi):
    """Minimizer of the cubic through two (value, slope) endpoints."""
    d1 = g_lo + g_hi - 3.0 * (f_lo - f_hi) / (a_lo - a_hi)
    radicand = d1**2 - g_lo * g_hi
    if radicand < 0.0:
        return None
    d2 = np.sign(a_hi - a_lo) * np.sqrt(radicand)
    denom = g_hi - g_lo + 2.0 * d2
    if denom == 0.0:
        return None
    return a_hi - (a_hi - a_lo) * (g_hi + d2 - d1) / denom

# Line-search outcomes
_LS_OK, _LS_NAN, _LS_STALL = "ok", "nan", "stall"


def _wolfe_line_search(phi, f0, slope0, alpha0, c1, c2, max_steps):
    """Strong-Wolfe search along a descent direction.

    ``phi(alpha)`` returns ``(f, slope, payload)`` or None for a non-finite
    evaluation. Returns ``(status, payload_of_accepted_point)``.
    """
    evals = 0

    def take(alpha):
        nonlocal evals
        evals += 1
        return phi(alpha)

    def zoom(a_lo, f_lo, g_lo, a_hi, f_hi, g_hi):
        nonlocal evals
        while evals < max_steps:
            step = _cubic_step(a_lo, f_lo, g_lo, a_hi, f_hi, g_hi)
            width = abs(a_hi - a_lo)
            lo, hi = min(a_lo, a_hi), max(a_lo, a_hi)
            if step is None or not lo + 0.1 * width <= step <= hi - 0.1 * width:
                step = 0.5 * (a_lo + a_hi)
            if width <= 1e-14 * max(1.0, abs(a_lo)):
                return _LS_STALL, None
            res = take(step)
            if res is None:
                return _LS_NAN, None
            f_a, g_a, payload = res
            if f_a > f0 + c1 * step * slope0 or f_a >= f_lo:
                a_hi, f_hi, g_hi = step, f_a, g_a
            else:
                if abs(g_a) <= -c2 * slope0:
                    return _LS_OK, payload
                if g_a * (a_hi - a_lo) >= 0.0:
                    a_hi, f_hi, g_hi = a_lo, f_lo, g_lo
                a_lo, f_lo, g_lo = step, f_a, g_a
        return _LS_STALL, None

    a_prev, f_prev, g_prev = 0.0, f0, slope0
    alpha = alpha0
    first = True
    while evals < max_steps:
        res = take(alpha)
        if res is None:
            return _LS_NAN, None
        f_a, g_a, payload = res
        if f_a > f0 + c1 * alpha * slope0 or (not first and f_a >= f_prev):
            return zoom(a_prev, f_prev, g_prev, alpha, f_a, g_a)
        if abs(g_a) <= -c2 * slope0:
            return _LS_OK, payload
        if g_a >= 0.0:
            return zoom(alpha, f_a, g_a, a_prev, f_prev, g_prev)
        a_prev, f_prev, g_prev = alpha, f_a, g_a
        alpha *= 2.0
        first = False
    return _LS_STALL, None


def minimize(objective, x0, config=LbfgsConfig()):
    """Minimize ``objective(x) -> (value, gradient)`` from ``x0``.

    The objective may raise :class:`NonFiniteObjective` (or return NaN/Inf)
    at any query point; see the module docstring for the restart semantics.
    Identical inputs produce identical results.

    Raises
    ------
    InvalidStart
        If the objective is non-finite at ``x0`` itself.
    """
    safe = _SafeObjective(objective)
    x = np.asarray(x0, dtype=float).copy()
    start = safe(x)
    if start is None:
        raise InvalidStart("objective is non-finite at the starting point")
    f, g = start

    history = []  # (s, y, rho) curvature pairs, oldest first
    restarts_used = 0
    best_x, best_f, best_g = x.copy(), f, g
    iterations = 0
    termination = MAX_ITERS

    while iterations < config.max_iterations:
        grad_norm = float(np.max(np.abs(g))) if g.size else 0.0
        if grad_norm <= config.grad_tol:
            termination = GRAD_TOL
            break
        iterations += 1

        if history:
            direction = _two_loop_direction(g, history)
            alpha0 = 1.0
            if float(g @ direction) >= 0.0:
                # numerically corrupt curvature; fall back to steepest descent
                history.clear()
                direction = -g
                alpha0 = min(1.0, 1.0 / float(np.linalg.norm(g)))
        else:
            direction = -g
            alpha0 = min(1.0, 1.0 / float(np.linalg.norm(g)))
        slope0 = float(g @ direction)

        def phi(alpha):
            x_trial = x + alpha * direction
            res = safe(x_trial)
            if res is None:
                return None
            f_trial, g_trial = res
            return f_trial, float(g_trial @ direction), (x_trial, f_trial, g_trial)

        status, payload = _wolfe_line_search(
            phi, f, slope0, alpha0,
            config.wolfe_c1, config.wolfe_c2, config.max_line_search_steps,
        )

        if status == _LS_OK:
            x_new, f_new, g_new = payload
            s = x_new - x
            y = g_new - g
            sy = float(s @ y)
            if sy > 1e-12 * float(np.linalg.norm(s)) * float(np.linalg.norm(y)):
                history.append((s, y, 1.0 / sy))
                if len(history) > config.memory_pairs:
                    history.pop(0)
            x, f, g = x_new, f_new, g_new
            if f < best_f:
                best_x, best_f, best_g = x.copy(), f, g
            continue

        # Line search failed: NaN region or stall. A non-finite evaluation
        # always consumes a restart; a stall only resets when there is
        # history to clear, otherwise the search has genuinely stalled.
        if status == _LS_STALL and not history:
            termination = LINE_SEARCH_STALL
            break
        if restarts_used >= config.max_restarts:
            termination = RESTARTS_EXHAUSTED
            break
        restarts_used += 1
        history.clear()

    grad_norm = float(np.max(np.abs(best_g))) if best_g.size else 0.0
    return OptResult(
        x_final=best_x,
        f_final=best_f,
        grad_norm_final=grad_norm,
        iterations=iterations,
        restarts_used=restarts_used,
        termination=termination,
    )
