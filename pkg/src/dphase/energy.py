"""Energy functional of the two-parameter problem and its minimizers.

    H_alpha(u) = int a|grad u|^p - alpha int a|u|^p
    G_beta(u)  = int |grad u|^q  - beta  int |u|^q
    E(u)       = H_alpha(u)/p + G_beta(u)/q

Critical points of E are the (discrete) weak solutions of
-div(a|grad u|^{p-2} grad u) - div(|grad u|^{q-2} grad u)
    = alpha a |u|^{p-2} u + beta |u|^{q-2} u,   u = 0 on the boundary.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .eigen import Spectrum
from .forms import dual_norm, grad_term, mass_term
from .grid import Field, Grid
from .optim import ConvergenceError, DescentState, SolverOptions, armijo_descent
from .orlicz import Exponents, WeightSpec, luxemburg_norm


@dataclass(frozen=True)
class ProblemParams:
    exponents: Exponents
    weight: WeightSpec
    alpha: float
    beta: float

    @property
    def p(self) -> float:
        return self.exponents.p

    @property
    def q(self) -> float:
        return self.exponents.q

    def shifted(self, alpha: float, beta: float) -> "ProblemParams":
        return ProblemParams(self.exponents, self.weight, float(alpha), float(beta))


@dataclass(eq=False)
class SolveResult:
    u: Field
    energy: float
    grad_norm: float  # relative residual ||E'(u)|| / (||stiffness part|| + ||reaction part||)
    nontrivial: bool
    positive_interior: bool
    on_nehari: bool
    iterations: int
    status: str = ""
    method: str = ""
    norm_theta: float = 0.0
    H: float = 0.0
    G: float = 0.0
    seed: int | None = None
    notes: dict = field(default_factory=dict)

    def accepted(self, tol: float) -> bool:
        """A positive solution found to tolerance."""
        return self.nontrivial and self.grad_norm <= tol and self.positive_interior


@dataclass
class _Parts:
    P_grad: float
    P_mass: float
    Q_grad: float
    Q_mass: float
    dP_grad: np.ndarray | None
    dP_mass: np.ndarray | None
    dQ_grad: np.ndarray | None
    dQ_mass: np.ndarray | None


class EnergyModel:
    """Evaluates the four power integrals of E on one grid, with derivatives."""

    def __init__(self, grid: Grid, params: ProblemParams):
        self.grid = grid
        self.params = params
        self.a_cells = params.weight.cellwise(grid)
        self.a_nodes = params.weight.nodal(grid)

    def parts(self, u: np.ndarray, need_grad: bool = True) -> _Parts:
        g, p, q = self.grid, self.params.p, self.params.q
        Pg, dPg = grad_term(g, u, self.a_cells, p, need_grad)
        Pm, dPm = mass_term(g, u, self.a_nodes, p, need_grad)
        Qg, dQg = grad_term(g, u, 1.0, q, need_grad)
        Qm, dQm = mass_term(g, u, 1.0, q, need_grad)
        return _Parts(Pg, Pm, Qg, Qm, dPg, dPm, dQg, dQm)

    def HG(self, u: np.ndarray) -> tuple[float, float]:
        pt = self.parts(u, need_grad=False)
        return pt.P_grad - self.params.alpha * pt.P_mass, pt.Q_grad - self.params.beta * pt.Q_mass

    def energy(self, u: np.ndarray) -> float:
        H, G = self.HG(u)
        return H / self.params.p + G / self.params.q

    def energy_and_gradient(self, u: np.ndarray) -> tuple[float, np.ndarray]:
        pr = self.params
        pt = self.parts(u)
        H = pt.P_grad - pr.alpha * pt.P_mass
        G = pt.Q_grad - pr.beta * pt.Q_mass
        dE = (pt.dP_grad - pr.alpha * pt.dP_mass) / pr.p + (pt.dQ_grad - pr.beta * pt.dQ_mass) / pr.q
        return H / pr.p + G / pr.q, dE

    def relative_residual(self, u: np.ndarray) -> float:
        pr, g = self.params, self.grid
        pt = self.parts(u)
        stiff = g.restrict(pt.dP_grad / pr.p + pt.dQ_grad / pr.q)
        react = g.restrict(pr.alpha * pt.dP_mass / pr.p + pr.beta * pt.dQ_mass / pr.q)
        den = dual_norm(g, stiff) + dual_norm(g, react)
        if den == 0.0:
            return 0.0
        return dual_norm(g, stiff - react) / den


def _model(u: Field, params: ProblemParams) -> EnergyModel:
    return EnergyModel(u.grid, params)


def H_alpha(u: Field, params: ProblemParams) -> float:
    return _model(u, params).HG(u.values)[0]


def G_beta(u: Field, params: ProblemParams) -> float:
    return _model(u, params).HG(u.values)[1]


def energy(u: Field, params: ProblemParams) -> float:
    return _model(u, params).energy(u.values)


def energy_gradient(u: Field, params: ProblemParams) -> Field:
    """Exact nodal derivative of the discrete energy (zero on the boundary)."""
    _, dE = _model(u, params).energy_and_gradient(u.values)
    return Field.from_interior(u.grid, u.grid.restrict(dE))


# -- shared bookkeeping for the minimizers ---------------------------------------


def reference_norm(spectrum: Spectrum) -> float:
    e = spectrum.exponents
    return luxemburg_norm(spectrum.q.phi, spectrum.weight, e.p, e.q)


def finalize(model: EnergyModel, u_int: np.ndarray, spectrum: Spectrum, opts: SolverOptions,
             *, iterations: int, status: str, method: str, seed=None, notes=None) -> SolveResult:
    """Package an iterate as a SolveResult with all diagnostics recomputed."""
    grid, pr = model.grid, model.params
    u = Field.from_interior(grid, u_int)
    H, G = model.HG(u.values)
    norm = luxemburg_norm(u, pr.weight, pr.p, pr.q)
    nontrivial = norm > opts.eps_exist * reference_norm(spectrum)
    res = model.relative_residual(u.values)
    scale = abs(H) + abs(G)
    on_nehari = nontrivial and abs(H + G) <= 1e-8 * scale
    return SolveResult(
        u=u,
        energy=H / pr.p + G / pr.q,
        grad_norm=res,
        nontrivial=bool(nontrivial),
        positive_interior=bool(np.all(u_int > 0)),
        on_nehari=bool(on_nehari),
        iterations=iterations,
        status=status,
        method=method,
        norm_theta=norm,
        H=H,
        G=G,
        seed=seed,
        notes=dict(notes or {}),
    )


def _relative_step_cap(fraction: float):
    def cap(x, d):
        dn = np.max(np.abs(d))
        if dn == 0:
            return math.inf
        return fraction * max(np.max(np.abs(x)), 1e-300) / dn

    return cap


def descend_energy(model: EnergyModel, x0: np.ndarray, spectrum: Spectrum, opts: SolverOptions,
                   objective=None, residual=None) -> DescentState:
    """Armijo descent on E (or on ``objective``) with collapse/escape detection."""
    fg = objective or model.energy_and_gradient
    res_fn = residual or model.relative_residual
    grid = model.grid
    small = opts.eps_exist * 1e-2
    cap = opts.divergence_cap

    def fun_grad(x):
        f, d = fg(grid.embed(x))
        return f, grid.restrict(d)

    def stop(st):
        sup = np.max(np.abs(st.x))
        if sup > cap:
            return "diverged"
        if sup < small:
            return "collapsed"
        if st.iterations % 5 == 0 or st.iterations < 5:
            if res_fn(grid.embed(st.x)) <= opts.tol:
                return "converged"
        return None

    st = armijo_descent(fun_grad, x0, opts, stop, max_step=_relative_step_cap(0.5))
    if st.status in ("linesearch", "max_iter", "stagnated") and res_fn(grid.embed(st.x)) <= opts.tol:
        st.status = "converged"
    return st


def fibering_start(model: EnergyModel, phi: np.ndarray) -> float:
    """Scale t minimizing E(t phi) when that minimum is negative; 1 otherwise."""
    H, G = model.HG(phi)
    p, q = model.params.p, model.params.q
    if G < 0 < H:
        return (-G / H) ** (1.0 / (p - q))
    return 1.0


def _polish_positive(model, st, spectrum, opts, seed, method, rounds=3):
    """Replace the iterate by |u| and re-descend until the residual holds."""
    x = np.abs(st.x)
    iters = st.iterations
    status = st.status
    for _ in range(rounds):
        if status != "converged" or model.relative_residual(model.grid.embed(x)) <= opts.tol:
            break
        st2 = descend_energy(model, x, spectrum, opts)
        iters += st2.iterations
        status = st2.status
        x = np.abs(st2.x)
    if status == "converged" and model.relative_residual(model.grid.embed(x)) > opts.tol:
        status = "sign-polish-failed"
    return finalize(model, x, spectrum, opts, iterations=iters, status=status, method=method, seed=seed)


def minimize_global(params: ProblemParams, spectrum: Spectrum, opts: SolverOptions | None = None,
                    extra_starts=()) -> SolveResult:
    """Lowest-energy critical point found by descent from t*phi_q and random restarts.

    ``extra_starts`` are additional interior vectors (warm starts) descended
    as given.  Runs that escape to infinity or collapse to zero are reported
    as such; a ConvergenceError is raised only when every run stalls.
    """
    opts = opts or SolverOptions()
    grid = spectrum.grid
    model = EnergyModel(grid, params)
    phi_q = grid.restrict(spectrum.q.phi.values)
    starts = [("phi_q", None, fibering_start(model, grid.embed(phi_q)) * phi_q)]
    for k in range(opts.restarts):
        rng = np.random.default_rng([opts.seed, k, 101])
        v = phi_q * (1.0 + 0.5 * rng.standard_normal(phi_q.size)) + 0.25 * rng.random(phi_q.size)
        v = np.abs(v)
        v = v / np.max(v)
        starts.append((f"random{k}", k, fibering_start(model, grid.embed(v)) * v))
    for j, x in enumerate(extra_starts):
        starts.append((f"warm{j}", None, np.abs(np.asarray(x, dtype=float))))
    results: list[SolveResult] = []
    stalls = []
    for label, seed, x0 in starts:
        e0 = model.energy(grid.embed(x0))
        st = descend_energy(model, x0, spectrum, opts)
        if st.status in ("linesearch", "max_iter", "stagnated"):
            stalls.append(f"{label}: {st.status}")
            continue
        r = _polish_positive(model, st, spectrum, opts, seed, "global")
        r.notes["start"] = label
        r.notes["start_energy"] = e0
        results.append(r)
    if not results:
        raise ConvergenceError("global descent stalled on every start: " + "; ".join(stalls))
    good = [r for r in results if r.status == "converged" and r.nontrivial]
    if good:
        return min(good, key=lambda r: r.energy)
    for wanted in ("collapsed", "diverged"):
        for r in results:
            if r.status == wanted:
                return r
    return results[0]


# -- truncated problem -------------------------------------------------------------


def _truncation_pieces(u: np.ndarray, w: np.ndarray, r: float):
    """F_r(x, u) = T^r / r + w^{r-1} (u - w)_+ with T = min(u_+, w), and dF_r/du = T^{r-1}."""
    T = np.minimum(np.maximum(u, 0.0), w)
    F = T**r / r + w ** (r - 1.0) * np.maximum(u - w, 0.0)
    return F, T ** (r - 1.0)


def truncated_model(nu: float, s: float, w_super: Field, params_base: ProblemParams):
    """Objective J of the truncated problem as a ``u -> (J, dJ)`` callable."""
    grid = w_super.grid
    pr = params_base.shifted(nu + s, nu)
    model = EnergyModel(grid, pr)
    w = w_super.values
    mw_a = grid.mass * model.a_nodes
    m = grid.mass

    def objective(u):
        pt = model.parts(u)
        Fp, fp = _truncation_pieces(u, w, pr.p)
        Fq, fq = _truncation_pieces(u, w, pr.q)
        J = pt.P_grad / pr.p + pt.Q_grad / pr.q - (nu + s) * np.sum(mw_a * Fp) - nu * np.sum(m * Fq)
        dJ = pt.dP_grad / pr.p + pt.dQ_grad / pr.q - (nu + s) * mw_a * fp - nu * m * fq
        return float(J), dJ

    def residual(u):
        _, dJ = objective(u)
        pt = model.parts(u)
        stiff = grid.restrict(pt.dP_grad / pr.p + pt.dQ_grad / pr.q)
        den = 2.0 * dual_norm(grid, stiff)
        return dual_norm(grid, grid.restrict(dJ)) / den if den > 0 else 0.0

    return model, objective, residual


def truncated_minimize(nu: float, s: float, w_super: Field, params_base: ProblemParams,
                       spectrum: Spectrum, opts: SolverOptions | None = None,
                       max_rounds: int = 6) -> SolveResult:
    """Global minimizer of the truncated functional J, clamped into [0, w_super].

    With w_super a positive solution at (nu + s', nu), s' >= s, the result
    is a solution of the untruncated problem at (nu + s, nu).
    """
    opts = opts or SolverOptions()
    grid = w_super.grid
    model, objective, residual = truncated_model(nu, s, w_super, params_base)
    w_int = grid.restrict(w_super.values)
    if np.any(w_int < 0):
        raise ValueError("super-solution must be nonnegative")
    if not np.any(w_int > 0):
        return finalize(model, np.zeros(grid.n_interior), spectrum, opts, iterations=0,
                        status="trivial-supersolution", method="truncated")
    phi = grid.restrict(spectrum.q.phi.values)
    with np.errstate(divide="ignore"):
        room = np.min(np.where(phi > 0, w_int / phi, np.inf))
    x = 0.5 * room * phi
    iters = 0
    status = "max_rounds"
    for _ in range(max_rounds):
        st = descend_energy(model, x, spectrum, opts, objective=objective, residual=residual)
        iters += st.iterations
        clamped = np.clip(st.x, 0.0, w_int)
        moved = np.max(np.abs(clamped - x))
        x = clamped
        if st.status == "collapsed":
            status = "collapsed"
            break
        if st.status in ("converged",) and np.max(np.abs(clamped - st.x)) <= 1e-12 * np.max(w_int):
            status = "converged"
            break
        if moved <= 1e-14 * np.max(w_int):
            status = st.status
            break
    else:
        if residual(grid.embed(x)) > opts.tol:
            raise ConvergenceError("truncated minimization did not reach a fixed point",
                                   DescentState(x=x, f=objective(grid.embed(x))[0], g=x))
    out = finalize(model, x, spectrum, opts, iterations=iters, status=status, method="truncated")
    out.notes["J"] = objective(grid.embed(x))[0]
    out.notes["truncated_residual"] = residual(grid.embed(x))
    out.notes["below_super"] = bool(np.all(x <= w_int + 1e-14))
    return out
