"""First eigenpairs of weighted r-Laplacians and the threshold constants.

The first eigenvalue is the minimum of the weighted Rayleigh quotient

    R(v) = int w |grad v|^r / int w |v|^r

over nonzero Dirichlet fields; it is computed by descent on R from
positive random starts, keeping the best of several restarts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .forms import dual_norm, grad_term, mass_term
from .grid import Field, Grid, integrate
from .optim import ConvergenceError, SolverOptions, armijo_descent
from .orlicz import Exponents, WeightSpec


@dataclass(frozen=True, eq=False)
class EigenResult:
    lam: float
    phi: Field
    residual: float  # relative residual of the discrete eigen-equation at phi
    restarts_used: int
    weight: WeightSpec
    r: float


def _rayleigh_parts(grid: Grid, w: WeightSpec, r: float, v: np.ndarray, need_grad=True):
    A, dA = grad_term(grid, v, w.cellwise(grid), r, need_grad)
    B, dB = mass_term(grid, v, w.nodal(grid), r, need_grad)
    return A, dA, B, dB


def rayleigh_quotient(w: WeightSpec, r: float, v: Field) -> float:
    grid = v.grid
    A, _, B, _ = _rayleigh_parts(grid, w, r, v.values, need_grad=False)
    if B == 0.0:
        raise ValueError("Rayleigh quotient undefined for the zero field")
    return A / B


def eigen_residual(w: WeightSpec, r: float, v: Field) -> float:
    """Relative dual-norm residual ||dA - R dB|| / ||dA|| of the eigen-equation."""
    grid = v.grid
    A, dA, B, dB = _rayleigh_parts(grid, w, r, v.values)
    lam = A / B
    res = grid.restrict(dA - lam * dB)
    den = dual_norm(grid, grid.restrict(dA))
    return dual_norm(grid, res) / den if den > 0 else math.inf


def _positive_start(grid: Grid, rng: np.random.Generator) -> np.ndarray:
    prof = np.ones(grid.shape)
    for k, x in enumerate(grid.axes):
        shape = [1] * grid.dimension
        shape[k] = -1
        prof = prof * np.sin(np.pi * x / x[-1]).reshape(shape)
    noise = 1.0 + 0.5 * rng.random(grid.shape)
    v = np.where(grid.boundary, 0.0, np.abs(prof) * noise)
    return grid.restrict(v) / np.max(v)


def _descend(grid: Grid, w: WeightSpec, r: float, x0: np.ndarray, opts: SolverOptions):
    def fg(x):
        v = grid.embed(x)
        A, dA, B, dB = _rayleigh_parts(grid, w, r, v)
        if B <= 0:
            return math.inf, np.zeros_like(x)
        R = A / B
        return R, grid.restrict(dA - R * dB) / B

    recent: list[float] = []

    def stop(st):
        v = grid.embed(st.x)
        _, dA, B, dB = _rayleigh_parts(grid, w, r, v)
        res = dual_norm(grid, grid.restrict(dA - st.f * dB)) / max(dual_norm(grid, grid.restrict(dA)), 1e-300)
        recent.append(st.f)
        if res <= opts.eig_tol:
            return "converged"
        if len(recent) > 25:
            old = recent[-26]
            if old - st.f <= opts.eig_tol * 1e-3 * abs(st.f) and res <= 1e-5:
                return "stagnated"
        return None

    def after_step(x):
        nrm = np.max(np.abs(x))
        flipped = np.any(x < 0)
        if flipped or not 0.5 <= nrm <= 2.0:
            return np.abs(x) / np.max(np.abs(x))
        return None

    return armijo_descent(fg, x0, opts, stop, after_step=after_step)


def first_eigenpair(w: WeightSpec, r: float, grid: Grid, opts: SolverOptions | None = None) -> EigenResult:
    """Smallest eigenvalue and positive, sup-normalized eigenfunction of -div(w|grad v|^{r-2} grad v)."""
    opts = opts or SolverOptions()
    if r <= 1:
        raise ValueError("r must exceed 1")
    if opts.restarts < 1:
        raise ValueError("need at least one restart")
    w.validate_on(grid)
    best = None
    failures = []
    for k in range(opts.restarts):
        rng = np.random.default_rng([opts.seed, k, 17])
        st = _descend(grid, w, r, _positive_start(grid, rng), opts)
        if st.status not in ("converged", "stagnated"):
            failures.append(f"restart {k}: {st.status} after {st.iterations} its, R={st.f:.10g}")
            continue
        if best is None or st.f < best.f:
            best = st
    if best is None:
        raise ConvergenceError("eigen-descent failed on every restart: " + "; ".join(failures))
    v = np.abs(best.x)
    v = v / np.max(v)
    phi = Field.from_interior(grid, v)
    lam = rayleigh_quotient(w, r, phi)
    return EigenResult(
        lam=lam,
        phi=phi,
        residual=eigen_residual(w, r, phi),
        restarts_used=opts.restarts,
        weight=w,
        r=r,
    )


@dataclass(frozen=True)
class SpectrumConstants:
    lambda1_ap: float
    lambda1_q: float
    s_tilde_minus: float
    s_tilde_plus: float
    s_star: float
    s_star_minus: float
    s_star_plus: float

    def ordering_violations(self, tol: float = 0.0) -> list[str]:
        out = []
        if self.s_tilde_plus < self.lambda1_ap - tol:
            out.append("s_tilde_plus < lambda1_ap")
        if self.s_tilde_minus < self.lambda1_q - tol:
            out.append("s_tilde_minus < lambda1_q")
        if self.s_star_minus > self.s_star + tol:
            out.append("s_star_minus > s_star")
        if self.s_star > self.s_star_plus + tol:
            out.append("s_star > s_star_plus")
        return out


@dataclass(frozen=True)
class LIReport:
    holds: bool
    best_k: float
    alignment_residual: float
    threshold: float


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Both eigenpairs with the derived constants."""

    exponents: Exponents
    weight: WeightSpec
    grid: Grid
    pa: EigenResult  # weighted p-Laplacian
    q: EigenResult  # q-Laplacian
    constants: SpectrumConstants


def constants_from_eigenpairs(pa: EigenResult, q: EigenResult, exps: Exponents, a: WeightSpec,
                              overflow_guard: float = 1e12) -> SpectrumConstants:
    grid = pa.phi.grid
    num_minus, _ = grad_term(grid, pa.phi.values, 1.0, exps.q, need_grad=False)
    den_minus, _ = mass_term(grid, pa.phi.values, 1.0, exps.q, need_grad=False)
    if not math.isfinite(num_minus) or num_minus > overflow_guard:
        s_minus = math.inf
    else:
        s_minus = num_minus / den_minus
    num_plus, _ = grad_term(grid, q.phi.values, a.cellwise(grid), exps.p, need_grad=False)
    den_plus, _ = mass_term(grid, q.phi.values, a.nodal(grid), exps.p, need_grad=False)
    s_plus = num_plus / den_plus
    lam_ap, lam_q = pa.lam, q.lam
    return SpectrumConstants(
        lambda1_ap=lam_ap,
        lambda1_q=lam_q,
        s_tilde_minus=s_minus,
        s_tilde_plus=s_plus,
        s_star=lam_ap - lam_q,
        s_star_minus=lam_ap - s_minus,
        s_star_plus=s_plus - lam_q,
    )


def spectrum_constants(p: float, q: float, a: WeightSpec, grid: Grid, opts: SolverOptions | None = None) -> Spectrum:
    opts = opts or SolverOptions()
    exps = Exponents(p, q)
    exps.check_sobolev(grid.dimension)
    pa = first_eigenpair(a, p, grid, opts)
    eq = first_eigenpair(WeightSpec.constant(1.0), q, grid, opts)
    consts = constants_from_eigenpairs(pa, eq, exps, a, opts.overflow_guard)
    return Spectrum(exps, a, grid, pa, eq, consts)


def li_diagnostic(phi_pa: Field, phi_q: Field, threshold: float = 1e-3) -> LIReport:
    """Least-squares test of phi_pa = k * phi_q in the discrete L2 product."""
    grid = phi_q.grid
    a, b = phi_pa.values, phi_q.values
    bb = integrate(b * b, grid)
    aa = integrate(a * a, grid)
    if aa == 0 or bb == 0:
        raise ValueError("both eigenfunctions must be nonzero")
    k = integrate(a * b, grid) / bb
    diff = a - k * b
    res = math.sqrt(max(integrate(diff * diff, grid), 0.0) / aa)
    return LIReport(holds=bool(res > threshold), best_k=k, alignment_residual=res, threshold=threshold)
