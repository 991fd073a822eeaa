"""Existence regions in the (alpha, beta) plane.

Four tools live here:

* :func:`classify_theoretical`, an exact case analysis returning which
  existence statement (if any) covers a parameter pair;
* :func:`detect_existence`, the numerical counterpart, which runs the
  global and Nehari solvers and reports whether a positive solution was found;
* :func:`lambda_star` / :func:`trace_curve`, which locate the curve
  beta = lambda*(s), s = alpha - beta, separating existence from
  non-existence along each diagonal;
* :func:`picone_certificate` and :func:`region_map`.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .eigen import LIReport, Spectrum, SpectrumConstants
from .energy import ProblemParams, SolveResult, minimize_global, truncated_minimize
from .grid import Field, gradient
from .nehari import NehariEmptyError, nehari_ground_state
from .optim import ConvergenceError, SolverOptions


class Verdict(str, Enum):
    EXISTS_GLOBAL_MIN = "ExistsGlobalMin"
    EXISTS_GROUND_STATE_POS = "ExistsGroundStatePos"
    EXISTS_GROUND_STATE_NEG = "ExistsGroundStateNeg"
    EXISTS_ON_CURVE = "ExistsOnCurve"
    NOT_EXISTS = "NotExists"
    UNKNOWN = "UnknownTheory"

    @property
    def exists(self) -> bool:
        return self.value.startswith("Exists")


@dataclass(frozen=True)
class RegionClass:
    verdict: Verdict
    source: str  # tag of the statement that decides the cell

    @property
    def covered(self) -> bool:
        return self.verdict is not Verdict.UNKNOWN


CurveFn = Callable[[float], "float | None"]


def _cmp(x: float, y: float, tol: float) -> int:
    if x < y - tol:
        return -1
    if x > y + tol:
        return 1
    return 0


def classify_theoretical(alpha: float, beta: float, consts: SpectrumConstants, li: LIReport, *,
                         curve: CurveFn | None = None, inf_positive: bool = True,
                         tol: float = 0.0) -> RegionClass:
    """Which existence statement covers (alpha, beta).

    ``curve(s)`` returns lambda*(s) (or None where it is not known); without
    it the strip between the two first eigenvalues and the curve is
    reported as unknown.  ``inf_positive`` tells whether inf a > 0.
    Comparisons treat values within ``tol`` as equal.
    """
    A, Q, S = consts.lambda1_ap, consts.lambda1_q, consts.s_tilde_plus
    ca, cb = _cmp(alpha, A, tol), _cmp(beta, Q, tol)
    if ca <= 0 and cb <= 0:
        if ca == 0 and cb == 0:
            if li.holds:
                return RegionClass(Verdict.NOT_EXISTS, "corner")
            return RegionClass(Verdict.EXISTS_ON_CURVE, "corner-collinear")
        return RegionClass(Verdict.NOT_EXISTS, "below-both")
    if ca < 0:
        return RegionClass(Verdict.EXISTS_GLOBAL_MIN, "global-min")
    if cb < 0:
        return RegionClass(Verdict.EXISTS_GROUND_STATE_POS, "nehari-positive")
    # alpha >= A and beta >= Q, not both equal
    if not li.holds:
        if ca > 0 and cb > 0:
            return RegionClass(Verdict.NOT_EXISTS, "collinear-eigenfunctions")
        if cb == 0 and not inf_positive:
            return RegionClass(Verdict.UNKNOWN, "open-degenerate-line")
        return RegionClass(Verdict.NOT_EXISTS, "collinear-eigenfunctions")
    cs = _cmp(alpha, S, tol)
    if cb == 0:
        if cs < 0:
            return RegionClass(Verdict.EXISTS_GROUND_STATE_POS, "nehari-boundary-line")
        if inf_positive:
            return RegionClass(Verdict.NOT_EXISTS, "nondegenerate-line")
        return RegionClass(Verdict.UNKNOWN, "open-degenerate-line")
    if cs > 0:
        return RegionClass(Verdict.NOT_EXISTS, "beyond-s-tilde-plus")
    if cs == 0:
        return RegionClass(Verdict.UNKNOWN, "s-tilde-plus")
    lam = curve(alpha - beta) if curve is not None else None
    if lam is None:
        return RegionClass(Verdict.UNKNOWN, "curve-not-traced")
    cl = _cmp(beta, lam, tol)
    if cl < 0:
        return RegionClass(Verdict.EXISTS_GROUND_STATE_NEG, "below-curve")
    if cl == 0:
        if lam + (alpha - beta) > A and lam > Q:
            return RegionClass(Verdict.EXISTS_ON_CURVE, "on-curve")
        return RegionClass(Verdict.UNKNOWN, "curve-endpoint")
    return RegionClass(Verdict.NOT_EXISTS, "above-curve")


def in_boundary_band(alpha: float, beta: float, consts: SpectrumConstants, d_alpha: float, d_beta: float,
                     curve: CurveFn | None = None) -> bool:
    """True when (alpha, beta) lies less than one grid step from a region boundary."""
    A, Q, S = consts.lambda1_ap, consts.lambda1_q, consts.s_tilde_plus
    shrink = 1.0 - 1e-9
    if abs(alpha - A) < d_alpha * shrink or abs(beta - Q) < d_beta * shrink:
        return True
    if beta > Q - d_beta and abs(alpha - S) < d_alpha * shrink:
        return True
    if curve is not None and alpha >= A and beta >= Q:
        lam = curve(alpha - beta)
        if lam is not None and abs(beta - lam) < d_beta * shrink:
            return True
    return False


# -- numerical detection -------------------------------------------------------------


@dataclass(eq=False)
class Detection:
    verdict: str  # "exists", "not-exists" or "unknown"
    result: SolveResult | None
    runs: dict = field(default_factory=dict)


def detect_existence(alpha: float, beta: float, spectrum: Spectrum, opts: SolverOptions | None = None,
                     warm=()) -> Detection:
    """Search for a positive solution at (alpha, beta) with both solvers.

    "exists" when some run returns a nontrivial positive field whose
    relative residual meets ``opts.tol``; "unknown" when a solver failed
    outright and nothing was found; "not-exists" otherwise.
    """
    opts = opts or SolverOptions()
    params = ProblemParams(spectrum.exponents, spectrum.weight, float(alpha), float(beta))
    runs: dict[str, str] = {}
    found: list[SolveResult] = []
    errors = 0
    try:
        r = minimize_global(params, spectrum, opts, extra_starts=warm)
        runs["global"] = r.status
        found.append(r)
    except (ConvergenceError, FloatingPointError) as exc:
        runs["global"] = f"error: {exc}"
        errors += 1
    try:
        r = nehari_ground_state(params, spectrum, opts)
        runs["nehari"] = r.status
        found.append(r)
    except NehariEmptyError:
        runs["nehari"] = "empty"
    except (ConvergenceError, FloatingPointError) as exc:
        runs["nehari"] = f"error: {exc}"
        errors += 1
    accepted = [r for r in found if r.accepted(opts.tol)]
    if accepted:
        return Detection("exists", min(accepted, key=lambda r: r.energy), runs)
    return Detection("unknown" if errors else "not-exists", found[0] if found else None, runs)


# -- the curve lambda*(s) ------------------------------------------------------------


class CurveError(ConvergenceError):
    """No non-existence point found below the growth cap."""


@dataclass(eq=False)
class CurvePoint:
    s: float
    lambda_star: float  # bracket midpoint
    bracket_width: float
    certificate: tuple[str, ...]
    lower: float = 0.0  # largest lambda with a detected (or certified) solution
    upper: float = 0.0  # smallest lambda where detection failed
    solution: SolveResult | None = None  # solution at ``lower`` if one was computed


def default_bisection_tol(consts: SpectrumConstants) -> float:
    return 1e-3 * (consts.s_tilde_plus - consts.lambda1_q + 1.0)


def lambda_star(s: float, spectrum: Spectrum, opts: SolverOptions | None = None, *,
                tol: float | None = None, super_solution: "tuple[float, SolveResult] | None" = None,
                growth: float = 2.0, cap: float | None = None) -> CurvePoint:
    """Bracket lambda*(s) = sup{lambda : a positive solution exists at (lambda + s, lambda)}.

    The lower end starts at max(lambda1_q, lambda1_ap - s).  A pair
    ``super_solution = (nu, w)`` with w a positive solution at
    (nu + s', nu), s' >= s, lifts it to nu through the truncated problem.
    The upper end grows geometrically until detection fails, then the
    bracket is bisected down to ``tol``.
    """
    opts = opts or SolverOptions()
    c = spectrum.constants
    tol = default_bisection_tol(c) if tol is None else tol
    cap = 1e3 * abs(c.lambda1_ap) if cap is None else cap
    lo = max(c.lambda1_q, c.lambda1_ap - s)
    cert = ["lower-bound"]
    lo_sol: SolveResult | None = None
    if super_solution is not None:
        nu, w = super_solution
        if nu > lo and w is not None and w.positive_interior:
            base = ProblemParams(spectrum.exponents, spectrum.weight, 0.0, 0.0)
            try:
                r = truncated_minimize(nu, s, w.u, base, spectrum, opts)
            except ConvergenceError:
                r = None
            if r is not None and r.accepted(opts.tol):
                lo, lo_sol = nu, r
                cert.append("truncation")

    def probe(lam):
        warm = [lo_sol.u.interior] if lo_sol is not None else ()
        return detect_existence(lam + s, lam, spectrum, opts, warm=warm)

    step = max(4.0 * tol, 0.05 * (c.s_tilde_plus - c.lambda1_q + 1.0))
    hi = lo + step
    while True:
        if hi > cap:
            raise CurveError(f"no upper bound for lambda*({s:.6g}) below the cap {cap:.6g}")
        det = probe(hi)
        if det.verdict != "exists":
            cert.append(f"upper:{det.verdict}")
            break
        lo, lo_sol = hi, det.result
        cert.append("detected")
        step *= growth
        hi = lo + step
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        det = probe(mid)
        if det.verdict == "exists":
            lo, lo_sol = mid, det.result
        else:
            hi = mid
    return CurvePoint(s=float(s), lambda_star=0.5 * (lo + hi), bracket_width=hi - lo,
                      certificate=tuple(dict.fromkeys(cert)), lower=lo, upper=hi, solution=lo_sol)


@dataclass(eq=False)
class CurveTrace:
    points: list[CurvePoint]
    failures: dict  # s -> message
    tol: float
    lambda_nonincreasing: bool
    sum_nondecreasing: bool

    def as_function(self, consts: SpectrumConstants) -> CurveFn:
        return curve_function(self.points, consts)


def trace_curve(s_min: float, s_max: float, n_points: int, spectrum: Spectrum,
                opts: SolverOptions | None = None, *, tol: float | None = None) -> CurveTrace:
    """lambda*(s) on an even s grid, swept from the largest s down.

    Each solution at the lower end of a bracket serves as super-solution
    certifying the next (smaller) s up to the same lambda.
    """
    if not s_min < s_max:
        raise ValueError("need s_min < s_max")
    if n_points < 2:
        raise ValueError("need at least two points")
    opts = opts or SolverOptions()
    tol = default_bisection_tol(spectrum.constants) if tol is None else tol
    points: list[CurvePoint] = []
    failures: dict[float, str] = {}
    prev: CurvePoint | None = None
    for s in np.linspace(s_max, s_min, n_points):
        sup = (prev.lower, prev.solution) if prev is not None and prev.solution is not None else None
        try:
            pt = lambda_star(float(s), spectrum, opts, tol=tol, super_solution=sup)
        except ConvergenceError as exc:
            failures[float(s)] = str(exc)
            continue
        points.append(pt)
        prev = pt
    points.sort(key=lambda p: p.s)
    lam = np.array([p.lambda_star for p in points])
    ss = np.array([p.s for p in points])
    slack = 2.0 * tol
    return CurveTrace(
        points=points,
        failures=failures,
        tol=tol,
        lambda_nonincreasing=bool(np.all(np.diff(lam) <= slack)),
        sum_nondecreasing=bool(np.all(np.diff(lam + ss) >= -slack)),
    )


def curve_function(points: Sequence[CurvePoint], consts: SpectrumConstants) -> CurveFn:
    """Piecewise-linear lambda*(s) through traced points; lambda1_q beyond s*_+."""
    pts = sorted(points, key=lambda p: p.s)
    ss = np.array([p.s for p in pts])
    ls = np.array([p.lambda_star for p in pts])

    def fn(s: float):
        if s >= consts.s_star_plus:
            return consts.lambda1_q
        if len(ss) == 0 or s < ss[0] or s > ss[-1]:
            return None
        return float(np.interp(s, ss, ls))

    return fn


# -- Picone certificate ----------------------------------------------------------------


@dataclass(frozen=True)
class PiconeReport:
    lhs: float  # int (alpha a u^{p-q} + beta) phi^q
    rhs: float  # int a |grad phi|^q |grad u|^{p-q} + int |grad phi|^q
    relative_gap: float  # (lhs - rhs) / (|lhs| + |rhs|)
    tol: float

    @property
    def passes(self) -> bool:
        return self.relative_gap <= self.tol


def picone_certificate(u: SolveResult | Field, params: ProblemParams, phi: Field,
                       tol: float = 1e-6) -> PiconeReport:
    """Both sides of the Picone-type inequality satisfied by every positive solution.

    A violation (relative gap above ``tol``) shows that ``u`` cannot be a
    positive solution at ``params``.
    """
    field_u = u.u if isinstance(u, SolveResult) else u
    grid = field_u.grid
    uv, pv = field_u.values, phi.values
    if np.any(uv[grid.interior] <= 0):
        raise ValueError("the certificate needs u > 0 at every interior node")
    if np.any(pv < 0):
        raise ValueError("the test function must be nonnegative")
    p, q = params.p, params.q
    a_n = params.weight.nodal(grid)
    a_c = params.weight.cellwise(grid)
    lhs = float(np.sum(grid.mass * (params.alpha * a_n * np.abs(uv) ** (p - q) + params.beta) * pv**q))
    gphi = gradient(phi).magnitude()
    gu = gradient(field_u).magnitude()
    rhs = float(np.sum(a_c * gphi**q * gu ** (p - q) + gphi**q) * grid.cell_volume)
    den = abs(lhs) + abs(rhs)
    gap = (lhs - rhs) / den if den > 0 else 0.0
    return PiconeReport(lhs=lhs, rhs=rhs, relative_gap=gap, tol=tol)


# -- region map ------------------------------------------------------------------------


@dataclass(eq=False)
class MapCell:
    alpha: float
    beta: float
    theory: RegionClass
    numeric: str | None  # None when the numerical pass was skipped
    in_band: bool
    energy: float | None = None
    grad_norm: float | None = None
    flags: tuple[str, ...] = ()
    solution: SolveResult | None = None  # best solution found by the numerical pass

    @property
    def checked(self) -> bool:
        """Covered by a statement and away from every boundary."""
        return self.theory.covered and not self.in_band and self.numeric is not None

    @property
    def agrees(self) -> bool | None:
        if not self.checked:
            return None
        return "disagree" not in self.flags and "energy-sign" not in self.flags


@dataclass(eq=False)
class RegionMap:
    alpha_grid: np.ndarray
    beta_grid: np.ndarray
    cells: list[MapCell]
    constants: SpectrumConstants
    li: LIReport
    d_alpha: float
    d_beta: float

    def disagreements(self) -> list[MapCell]:
        return [c for c in self.cells if c.agrees is False]


def probe_axes(consts: SpectrumConstants, half: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric (2 half + 1)-point axes centred on (lambda1_ap, lambda1_q).

    Steps are fractions of the distances to s~+ and s~- so that the grid
    reaches past s~+ and resolves the thin strip above lambda1_q.
    """
    A, Q = consts.lambda1_ap, consts.lambda1_q
    gap_a = consts.s_tilde_plus - A
    gap_b = consts.s_tilde_minus - Q
    da = 0.4 * gap_a if gap_a > 1e-3 * A else 0.05 * abs(A)
    db = 0.4 * gap_b if math.isfinite(gap_b) and gap_b > 1e-3 * Q else 0.05 * abs(Q)
    k = np.arange(-half, half + 1)
    return A + k * da, Q + k * db


def _energy_flags(theory: RegionClass, det: Detection) -> tuple[str, ...]:
    flags = []
    exists = det.verdict == "exists"
    if det.verdict == "unknown":
        flags.append("numeric-unknown")
    elif theory.covered and theory.verdict.exists != exists:
        flags.append("disagree")
    if exists and det.result is not None:
        e = det.result.energy
        if theory.verdict is Verdict.EXISTS_GLOBAL_MIN and not e < 0:
            flags.append("energy-sign")
        if theory.verdict is Verdict.EXISTS_GROUND_STATE_POS and not e > 0:
            flags.append("energy-sign")
    return tuple(flags)


_WORKER: dict = {}


def _init_worker(spectrum, opts):
    _WORKER["spectrum"], _WORKER["opts"] = spectrum, opts


def _detect_job(ab):
    det = detect_existence(ab[0], ab[1], _WORKER["spectrum"], _WORKER["opts"])
    r = det.result
    return det.verdict, (r.energy if r is not None else None), (r.grad_norm if r is not None else None), det


def region_map(alpha_values, beta_values, spectrum: Spectrum, li: LIReport,
               opts: SolverOptions | None = None, *, numeric: bool = True, curve: CurveFn | None = None,
               jobs: int = 1, inf_positive: bool | None = None) -> RegionMap:
    """Theory verdict, and optionally a numerical verdict, on every grid cell.

    Cells are ordered alpha-major.  With ``jobs > 1`` the numerical pass
    runs in a process pool; results do not depend on the job count.
    """
    opts = opts or SolverOptions()
    al = np.asarray(alpha_values, dtype=float)
    be = np.asarray(beta_values, dtype=float)
    consts = spectrum.constants
    if inf_positive is None:
        inf_positive = spectrum.weight.inf_positive
    da = float(np.min(np.diff(al))) if al.size > 1 else 1.0
    db = float(np.min(np.diff(be))) if be.size > 1 else 1.0
    pairs = [(float(a), float(b)) for a in al for b in be]
    theory = [classify_theoretical(a, b, consts, li, curve=curve, inf_positive=inf_positive) for a, b in pairs]
    band = [in_boundary_band(a, b, consts, da, db, curve) for a, b in pairs]
    dets: list = [None] * len(pairs)
    if numeric:
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker,
                                     initargs=(spectrum, opts)) as pool:
                dets = list(pool.map(_detect_job, pairs))
        else:
            _init_worker(spectrum, opts)
            dets = [_detect_job(ab) for ab in pairs]
    cells = []
    for (a, b), th, bd, dj in zip(pairs, theory, band, dets):
        if dj is None:
            cells.append(MapCell(a, b, th, None, bd))
            continue
        verdict, e, g, det = dj
        cells.append(MapCell(a, b, th, verdict, bd, e, g, _energy_flags(th, det), det.result))
    return RegionMap(al, be, cells, consts, li, da, db)
