"""Descent machinery shared by the eigen, energy and Nehari solvers.

Every minimizer in the package is a monotone descent with Armijo
backtracking.  Search directions come from a limited-memory BFGS two-loop
recursion; when that direction fails the Armijo test the memory is dropped
and the plain negative gradient is tried before giving up.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class SolverOptions:
    """Knobs for every iterative solver; all of them enter the cache hash."""

    tol: float = 1e-6  # relative residual accepted as a critical point
    eig_tol: float = 1e-9  # relative eigen-residual / relative R decrease
    max_iter: int = 4000
    restarts: int = 3
    seed: int = 0
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    step0: float = 1.0
    memory: int = 12
    eps_exist: float = 1e-6  # nontrivial iff ||u||_theta > eps_exist * ||phi_q||_theta
    divergence_cap: float = 1e6  # iterates beyond cap * ||phi_q||_theta count as escaping
    li_threshold: float = 1e-3
    overflow_guard: float = 1e12

    def with_(self, **kw) -> "SolverOptions":
        return replace(self, **kw)


class ConvergenceError(RuntimeError):
    """A descent stopped without meeting its tolerance."""

    def __init__(self, message: str, state: "DescentState | None" = None):
        super().__init__(message)
        self.state = state


@dataclass
class DescentState:
    x: np.ndarray
    f: float
    g: np.ndarray
    iterations: int = 0
    evaluations: int = 0
    status: str = "running"
    history: list = field(default_factory=list, repr=False)


FunGrad = Callable[[np.ndarray], "tuple[float, np.ndarray]"]


def _two_loop(g: np.ndarray, pairs) -> np.ndarray:
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * np.dot(s, q)
        alphas.append(a)
        q -= a * y
    if pairs:
        s, y, _ = pairs[-1]
        q *= np.dot(s, y) / np.dot(y, y)
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * np.dot(y, q)
        q += (a - b) * s
    return -q


def armijo_descent(
    fun_grad: FunGrad,
    x0: np.ndarray,
    opts: SolverOptions,
    stop: Callable[[DescentState], str | None],
    *,
    max_step: Callable[[np.ndarray, np.ndarray], float] | None = None,
    after_step: Callable[[np.ndarray], "np.ndarray | None"] | None = None,
    max_iter: int | None = None,
) -> DescentState:
    """Minimize ``fun_grad`` from ``x0`` until ``stop`` returns a status string.

    ``fun_grad`` may return ``inf`` for inadmissible points; the line search
    then simply backtracks.  ``max_step(x, d)`` caps the trial step length.
    ``after_step(x)`` may return a replacement iterate (renormalization,
    sign projection); the quasi-Newton memory is reset when it does.
    """
    x = np.array(x0, dtype=float)
    f, g = fun_grad(x)
    if not math.isfinite(f):
        raise ConvergenceError("starting point is not admissible")
    state = DescentState(x=x, f=f, g=g, evaluations=1)
    pairs: deque = deque(maxlen=opts.memory)
    limit = opts.max_iter if max_iter is None else max_iter
    flat = 0
    status = stop(state)
    while status is None:
        if state.iterations >= limit:
            status = "max_iter"
            break
        accepted = False
        for use_memory in (True, False):
            if use_memory and not pairs:
                continue
            d = _two_loop(state.g, list(pairs)) if use_memory else -state.g
            slope = float(np.dot(state.g, d))
            if not slope < 0:
                continue
            step = opts.step0
            if not use_memory:
                gn = np.linalg.norm(state.g)
                xn = np.linalg.norm(state.x)
                if gn > 0:
                    step = min(step, max(xn, 1e-12) / gn)
            if max_step is not None:
                step = min(step, max_step(state.x, d))
            while step > 1e-20 * max(1.0, np.linalg.norm(state.x)) / max(np.linalg.norm(d), 1e-300):
                x_new = state.x + step * d
                f_new, g_new = fun_grad(x_new)
                state.evaluations += 1
                if math.isfinite(f_new) and f_new <= state.f + opts.armijo_c * step * slope:
                    accepted = True
                    break
                step *= opts.backtrack
            if accepted:
                break
            pairs.clear()
        if not accepted:
            status = "linesearch"
            break
        flat = flat + 1 if state.f - f_new <= 1e-15 * abs(state.f) else 0
        s, y = x_new - state.x, g_new - state.g
        sy = float(np.dot(s, y))
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            pairs.append((s, y, 1.0 / sy))
        state.x, state.f, state.g = x_new, f_new, g_new
        state.iterations += 1
        if after_step is not None:
            replaced = after_step(state.x)
            if replaced is not None:
                state.x = replaced
                state.f, state.g = fun_grad(state.x)
                state.evaluations += 1
                pairs.clear()
        status = stop(state)
        if status is None and flat >= 10:
            status = "stagnated"
    state.status = status
    return state
