"""Fibering maps and ground states on the Nehari manifold.

For a direction v with H = H_alpha(v) and G = G_beta(v) of opposite sign,

    d/ds E(s v) = s^{p-1} H + s^{q-1} G

vanishes at exactly one s > 0, namely t(v) = (-G/H)^{1/(p-q)}, and t(v) v
lies on the manifold {u != 0 : H(u) + G(u) = 0}.  The reduced functional
Phi(v) = E(t(v) v) = (1/q - 1/p) t^q G is invariant under v -> c v, and
by the envelope theorem its gradient is t(v) E'(t(v) v).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .eigen import Spectrum
from .energy import EnergyModel, ProblemParams, SolveResult, finalize
from .grid import Field
from .optim import ConvergenceError, SolverOptions, armijo_descent
from .orlicz import luxemburg_norm


class ProjectionUndefinedError(ValueError):
    """Raised when H(v) G(v) >= 0, so the fibering map has no positive critical point."""


class NehariEmptyError(ConvergenceError):
    """No seed direction with H G < 0 was found."""


@dataclass(frozen=True)
class FiberingDiagnostics:
    H: float
    G: float
    t_of_v: float
    residual: float  # |t^p H + t^q G|

    @property
    def kind(self) -> str:
        """'min' when t(v) minimizes the fiber (E < 0 there), 'max' otherwise."""
        return "min" if self.H > 0 else "max"


def fibering_scale(H: float, G: float, p: float, q: float) -> float:
    if not H * G < 0:
        raise ProjectionUndefinedError(f"fibering map has no critical point (H={H:.6g}, G={G:.6g})")
    return (-G / H) ** (1.0 / (p - q))


def nehari_project(v: Field, params: ProblemParams) -> FiberingDiagnostics:
    """Scale t(v) placing t(v) v on the Nehari manifold."""
    H, G = EnergyModel(v.grid, params).HG(v.values)
    t = fibering_scale(H, G, params.p, params.q)
    return FiberingDiagnostics(H=H, G=G, t_of_v=t, residual=abs(t**params.p * H + t**params.q * G))


def _seeds(spectrum: Spectrum, opts: SolverOptions):
    grid = spectrum.grid
    fq = grid.restrict(spectrum.q.phi.values)
    fp = grid.restrict(spectrum.pa.phi.values)
    out = [("phi_q", None, fq), ("phi_pa", None, fp), ("mix", None, 0.5 * (fq + fp))]
    for k in range(opts.restarts):
        rng = np.random.default_rng([opts.seed, k, 202])
        base = fq if k % 2 == 0 else fp
        v = np.abs(base * (1.0 + 0.5 * rng.standard_normal(base.size)) + 0.1 * rng.random(base.size))
        out.append((f"random{k}", k, v / np.max(v)))
    return out


def _reduced(model: EnergyModel):
    """Phi(v) = E(t(v) v) and its gradient; +inf off the admissible set."""
    grid = model.grid
    p, q = model.params.p, model.params.q
    c = 1.0 / q - 1.0 / p

    def fun_grad(x):
        v = grid.embed(x)
        H, G = model.HG(v)
        if not H * G < 0:
            return math.inf, np.zeros_like(x)
        t = (-G / H) ** (1.0 / (p - q))
        _, dE = model.energy_and_gradient(t * v)
        return c * t**q * G, t * grid.restrict(dE)

    return fun_grad


def _scale(model: EnergyModel, x: np.ndarray) -> float:
    H, G = model.HG(model.grid.embed(x))
    return fibering_scale(H, G, model.params.p, model.params.q)


def _descend_directions(model: EnergyModel, x0: np.ndarray, opts: SolverOptions):
    grid, pr = model.grid, model.params
    fun_grad = _reduced(model)
    norm0 = np.max(np.abs(x0))

    def normalize(x):
        return x / luxemburg_norm(Field.from_interior(grid, x), pr.weight, pr.p, pr.q)

    def stop(st):
        t = _scale(model, st.x)
        size = t * np.max(np.abs(st.x))
        if size > opts.divergence_cap:
            return "diverged"
        if size < opts.eps_exist * 1e-2:
            return "collapsed"
        if st.iterations % 5 == 0 or st.iterations < 5:
            if model.relative_residual(grid.embed(t * st.x)) <= opts.tol:
                return "converged"
        return None

    def after_step(x):
        nrm = np.max(np.abs(x))
        if np.any(x < 0):
            x = np.abs(x)
            if not _reduced_ok(model, x):
                return None
            return normalize(x)
        if not norm0 / 1.25 <= nrm <= 1.25 * norm0:
            return normalize(x)
        return None

    x0 = normalize(x0)
    norm0 = np.max(np.abs(x0))
    st = armijo_descent(fun_grad, x0, opts, stop, after_step=after_step)
    if st.status in ("linesearch", "max_iter", "stagnated"):
        t = _scale(model, st.x)
        if model.relative_residual(grid.embed(t * st.x)) <= opts.tol:
            st.status = "converged"
        elif t * np.max(np.abs(st.x)) < opts.eps_exist * 1e-2:
            st.status = "collapsed"
    return st


def _reduced_ok(model: EnergyModel, x: np.ndarray) -> bool:
    H, G = model.HG(model.grid.embed(x))
    return H * G < 0


def nehari_ground_state(params: ProblemParams, spectrum: Spectrum,
                        opts: SolverOptions | None = None) -> SolveResult:
    """Minimize E over the Nehari manifold by descent on the reduced functional.

    Every admissible seed (eigenfunctions, their mixture and positive
    noise) is descended; the lowest-energy converged result is returned.
    """
    opts = opts or SolverOptions()
    grid = spectrum.grid
    model = EnergyModel(grid, params)
    p, q = params.p, params.q
    admissible = [(lab, sd, x) for lab, sd, x in _seeds(spectrum, opts) if _reduced_ok(model, x)]
    if not admissible:
        raise NehariEmptyError("no seed direction with H*G < 0; the manifold looks empty")
    results = []
    failures = []
    for label, seed, x0 in admissible:
        try:
            st = _descend_directions(model, x0, opts)
        except ConvergenceError as exc:
            failures.append(f"{label}: {exc}")
            continue
        if st.status not in ("converged", "diverged", "collapsed"):
            failures.append(f"{label}: {st.status}")
            continue
        v = np.abs(st.x)
        t = _scale(model, v)
        u = t * v
        r = finalize(model, u, spectrum, opts, iterations=st.iterations, status=st.status,
                     method="nehari", seed=seed)
        r.on_nehari = bool(r.nontrivial and abs(r.H + r.G) <= 1e-8 * (abs(r.H) + abs(r.G)))
        r.notes["start"] = label
        r.notes["t"] = t
        r.notes["fiber"] = "min" if r.H > 0 else "max"
        r.notes["manifold_identity_gap"] = abs(r.energy - (1.0 / q - 1.0 / p) * r.G)
        results.append(r)
    if not results:
        raise ConvergenceError("Nehari descent stalled on every seed: " + "; ".join(failures))
    good = [r for r in results if r.status == "converged"]
    pool = good or results
    best = min(pool, key=lambda r: r.energy)
    best.notes["seeds_tried"] = len(admissible)
    return best
