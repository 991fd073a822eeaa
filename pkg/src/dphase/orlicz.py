"""Weights, Musielak-Orlicz modulars and the Luxemburg norm.

The two generalized Phi-functions used throughout are

    theta0(x, t) = a(x) t**p        theta(x, t) = a(x) t**p + t**q

with 1 < q < p.  A modular is the quadrature of ``theta(x, |v|)`` over the
grid; it accepts nodal fields (the weight is sampled at the nodes) and cell
fields such as gradients (the weight is sampled at the cell centroids).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .grid import CellField, Field, Grid

WEIGHT_KINDS = ("constant", "bump", "power")


@dataclass(frozen=True)
class Exponents:
    p: float
    q: float

    def __post_init__(self):
        if not (1.0 < self.q < self.p) or not math.isfinite(self.p):
            raise ValueError(f"exponents need 1 < q < p, got p={self.p}, q={self.q}")

    def check_sobolev(self, dimension: int) -> None:
        """Reject p >= q* = Nq/(N-q); only meaningful when q < N."""
        if self.q < dimension:
            q_star = dimension * self.q / (dimension - self.q)
            if self.p >= q_star:
                raise ValueError(f"p={self.p} must stay below q*={q_star:.6g} in dimension {dimension}")


@dataclass(frozen=True)
class WeightSpec:
    """Parametric weight a(x).

    kind="constant": a = c (params: ``(c,)``, c > 0).
    kind="bump":     a = base + amp * prod_k 4 x_k (L_k - x_k) / L_k**2
                     (params: ``(base, amp)``, base >= 0, amp >= 0, base + amp > 0);
                     base = 0 makes a vanish on the boundary.
    kind="power":    a = |x - x0|**gamma (params: ``(gamma, *x0)``, 0 <= gamma < 1);
                     a vanishes at the interior point x0.
    """

    kind: str = "constant"
    params: tuple[float, ...] = (1.0,)

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(float(v) for v in self.params))
        k, prm = self.kind, self.params
        if k not in WEIGHT_KINDS:
            raise ValueError(f"unknown weight kind {k!r}; expected one of {WEIGHT_KINDS}")
        if k == "constant" and (len(prm) != 1 or prm[0] <= 0):
            raise ValueError("constant weight needs params=(c,) with c > 0")
        if k == "bump" and (len(prm) != 2 or prm[0] < 0 or prm[1] < 0 or prm[0] + prm[1] <= 0):
            raise ValueError("bump weight needs params=(base, amp), both >= 0, not both zero")
        if k == "power" and (len(prm) < 2 or not 0 <= prm[0] < 1):
            raise ValueError("power weight needs params=(gamma, *x0) with 0 <= gamma < 1")

    @classmethod
    def constant(cls, c: float = 1.0) -> "WeightSpec":
        return cls("constant", (c,))

    @classmethod
    def bump(cls, base: float, amp: float) -> "WeightSpec":
        return cls("bump", (base, amp))

    @classmethod
    def power(cls, gamma: float, center) -> "WeightSpec":
        return cls("power", (gamma, *np.atleast_1d(center)))

    @property
    def inf_positive(self) -> bool:
        """Whether inf a > 0 over the domain (balanced growth)."""
        if self.kind == "constant":
            return True
        if self.kind == "bump":
            return self.params[0] > 0
        return self.params[0] == 0.0

    @property
    def singular_point(self):
        if self.kind == "power" and self.params[0] > 0:
            return np.array(self.params[1:])
        return None

    def __call__(self, x: np.ndarray, extent=None) -> np.ndarray:
        """Evaluate at points ``x`` of shape ``(..., d)``."""
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.full(x.shape[:-1], self.params[0])
        if self.kind == "bump":
            if extent is None:
                raise ValueError("bump weight needs the domain extent")
            L = np.asarray(extent, dtype=float)
            prof = np.prod(4.0 * x * (L - x) / L**2, axis=-1)
            return self.params[0] + self.params[1] * np.clip(prof, 0.0, None)
        gamma, x0 = self.params[0], np.asarray(self.params[1:])
        if x0.shape[0] != x.shape[-1]:
            raise ValueError("power weight center has the wrong dimension")
        r = np.sqrt(np.sum((x - x0) ** 2, axis=-1))
        return r**gamma

    def nodal(self, grid: Grid) -> np.ndarray:
        return _nodal_weight(self, grid)

    def cellwise(self, grid: Grid) -> np.ndarray:
        return _cell_weight(self, grid)

    def validate_on(self, grid: Grid) -> None:
        """Check a > 0 at every interior node and every cell centroid."""
        if np.any(self.nodal(grid)[grid.interior] <= 0) or np.any(self.cellwise(grid) <= 0):
            raise ValueError(f"weight {self} vanishes at a quadrature point of {grid}")


@lru_cache(maxsize=64)
def _nodal_weight(w: WeightSpec, grid: Grid) -> np.ndarray:
    a = w(grid.coords, grid.extent)
    a.setflags(write=False)
    return a


@lru_cache(maxsize=64)
def _cell_weight(w: WeightSpec, grid: Grid) -> np.ndarray:
    a = w(grid.cell_centers, grid.extent)
    a.setflags(write=False)
    return a


# -- modulars -----------------------------------------------------------------


def _weighted_power_sum(v, a: WeightSpec | None, r: float) -> float:
    grid = v.grid
    if isinstance(v, CellField):
        mag = v.magnitude()
        w = 1.0 if a is None else a.cellwise(grid)
        return float(np.sum(w * mag**r) * grid.cell_volume)
    if isinstance(v, Field):
        w = 1.0 if a is None else a.nodal(grid)
        return float(np.sum(grid.mass * w * np.abs(v.values) ** r))
    raise TypeError(f"expected Field or CellField, got {type(v).__name__}")


def modular_theta0(v, a: WeightSpec, p: float) -> float:
    """Quadrature of a(x)|v|^p."""
    if p <= 1:
        raise ValueError("p must exceed 1")
    return _weighted_power_sum(v, a, p)


def power_integral(v, r: float) -> float:
    """Quadrature of |v|^r (unit weight), i.e. ``||v||_r**r``."""
    return _weighted_power_sum(v, None, r)


def modular_theta(v, a: WeightSpec, p: float, q: float) -> float:
    Exponents(p, q)
    return modular_theta0(v, a, p) + power_integral(v, q)


@dataclass(frozen=True)
class ModularReport:
    rho_theta: float
    rho_theta0: float
    q_part: float


def modular_report(v, a: WeightSpec, p: float, q: float) -> ModularReport:
    r0 = modular_theta0(v, a, p)
    rq = power_integral(v, q)
    return ModularReport(rho_theta=r0 + rq, rho_theta0=r0, q_part=rq)


class LuxemburgError(RuntimeError):
    pass


def luxemburg_norm(v, a: WeightSpec, p: float, q: float, tol: float = 1e-10, max_iter: int = 200) -> float:
    """Luxemburg norm: the unique lam > 0 with rho_theta(v / lam) = 1.

    Bisection in log(lam).  The starting bracket comes from the
    modular/norm sandwich, so it always contains the root.
    """
    rep = modular_report(v, a, p, q)
    if rep.rho_theta == 0.0:
        return 0.0
    if not math.isfinite(rep.rho_theta):
        raise LuxemburgError("modular is not finite")
    r0, rq = rep.rho_theta0, rep.q_part

    def excess(lam):
        return r0 * lam ** (-p) + rq * lam ** (-q) - 1.0

    rho = rep.rho_theta
    lo = min(rho ** (1 / p), rho ** (1 / q))
    hi = max(rho ** (1 / p), rho ** (1 / q))
    if abs(excess(lo)) <= tol:
        return lo
    if abs(excess(hi)) <= tol:
        return hi
    llo, lhi = math.log(lo), math.log(hi)
    for _ in range(max_iter):
        mid = 0.5 * (llo + lhi)
        e = excess(math.exp(mid))
        if abs(e) <= tol:
            return math.exp(mid)
        if e > 0:
            llo = mid
        else:
            lhi = mid
        if lhi - llo < 1e-15:
            return math.exp(0.5 * (llo + lhi))
    raise LuxemburgError(f"bisection did not reach |rho(v/lam) - 1| <= {tol} in {max_iter} steps")


# -- Muckenhoupt probe ------------------------------------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


def _box_integral(fn, lo: np.ndarray, hi: np.ndarray) -> float:
    d = lo.size
    t = 0.5 * (_GL_NODES + 1.0)
    wt = 0.5 * _GL_WEIGHTS
    if d == 1:
        x = lo[0] + (hi[0] - lo[0]) * t
        return float(np.sum(wt * fn(x[:, None])) * (hi[0] - lo[0]))
    X, Y = np.meshgrid(lo[0] + (hi[0] - lo[0]) * t, lo[1] + (hi[1] - lo[1]) * t, indexing="ij")
    W = np.outer(wt, wt)
    pts = np.stack([X, Y], axis=-1)
    return float(np.sum(W * fn(pts)) * np.prod(hi - lo))


def _corner_graded_integral(fn, corner: np.ndarray, far: np.ndarray, levels: int = 48) -> float:
    """Integral over the box spanned by ``corner`` and ``far`` when ``fn`` is singular at ``corner``.

    The box is peeled into geometrically shrinking shells towards the corner;
    peeling stops before the shells fall below floating-point resolution.
    """
    total = 0.0
    outer = far.copy()
    floor = 1e-12 * max(1.0, float(np.max(np.abs(corner))))
    for _ in range(levels):
        if np.max(np.abs(outer - corner)) < floor:
            break
        mid = corner + 0.5 * (outer - corner)
        d = corner.size
        if d == 1:
            total += _box_integral(fn, np.minimum(mid, outer), np.maximum(mid, outer))
        else:
            # shell = box(corner, outer) minus box(corner, mid): three sub-boxes
            for sub_lo, sub_hi in (
                ((mid[0], corner[1]), (outer[0], mid[1])),
                ((corner[0], mid[1]), (mid[0], outer[1])),
                ((mid[0], mid[1]), (outer[0], outer[1])),
            ):
                a, b = np.array(sub_lo), np.array(sub_hi)
                total += _box_integral(fn, np.minimum(a, b), np.maximum(a, b))
        outer = mid
    return total


def _average(fn, lo: np.ndarray, hi: np.ndarray, singular) -> float:
    vol = float(np.prod(hi - lo))
    if singular is None or np.any(singular <= lo) or np.any(singular >= hi):
        n_sub = 4
        edges = [np.linspace(lo[k], hi[k], n_sub + 1) for k in range(lo.size)]
        total = 0.0
        if lo.size == 1:
            for i in range(n_sub):
                total += _box_integral(fn, np.array([edges[0][i]]), np.array([edges[0][i + 1]]))
        else:
            for i in range(n_sub):
                for j in range(n_sub):
                    total += _box_integral(
                        fn,
                        np.array([edges[0][i], edges[1][j]]),
                        np.array([edges[0][i + 1], edges[1][j + 1]]),
                    )
        return total / vol
    total = 0.0
    corners = [lo, hi] if lo.size == 1 else [
        np.array([cx, cy]) for cx in (lo[0], hi[0]) for cy in (lo[1], hi[1])
    ]
    for far in corners:
        total += _corner_graded_integral(fn, singular.astype(float), far.astype(float))
    return total / vol


def sample_balls(extent, n_balls: int, center=None) -> list[tuple[np.ndarray, np.ndarray]]:
    """Deterministic list of ``n_balls`` cubes inside the domain.

    Level k contributes the cube of side L/2**k centred at ``center`` (when
    given and the cube fits) followed by the dyadic cubes of that side.
    """
    L = np.asarray(extent, dtype=float)
    d = L.size
    balls: list[tuple[np.ndarray, np.ndarray]] = []
    level = 0
    while len(balls) < n_balls:
        side = L / 2**level
        if center is not None:
            c = np.asarray(center, dtype=float)
            lo, hi = c - side / 2, c + side / 2
            if level > 0 and np.all(lo >= 0) and np.all(hi <= L):
                balls.append((lo, hi))
        counts = [2**level] * d
        for idx in np.ndindex(*counts):
            lo = np.array(idx, dtype=float) * side
            balls.append((lo, lo + side))
            if len(balls) >= n_balls:
                break
        level += 1
    return balls[:n_balls]


def muckenhoupt_constant_on(a: WeightSpec, p: float, lo: np.ndarray, hi: np.ndarray, extent) -> float:
    """(avg a) * (avg a^{1/(1-p)})^{p-1} over one cube."""
    sing = a.singular_point
    avg_a = _average(lambda x: a(x, extent), lo, hi, sing)
    dual = 1.0 / (1.0 - p)
    avg_dual = _average(lambda x: a(x, extent) ** dual, lo, hi, sing)
    return avg_a * avg_dual ** (p - 1.0)


def check_muckenhoupt(a: WeightSpec, p: float, n_balls: int, extent=(1.0,)) -> float:
    """Empirical A_p constant: the largest ball product over a sampled family of cubes.

    Returns ``inf`` when a^{1/(1-p)} is not integrable near the zero of a power weight.
    """
    if n_balls < 1:
        raise ValueError("need at least one ball")
    if p <= 1:
        raise ValueError("p must exceed 1")
    extent = tuple(np.atleast_1d(np.asarray(extent, dtype=float)))
    sing = a.singular_point
    if sing is not None:
        d = len(extent)
        if a.params[0] / (p - 1.0) >= d:
            return math.inf
    best = 0.0
    for lo, hi in sample_balls(extent, n_balls, center=sing):
        best = max(best, muckenhoupt_constant_on(a, p, lo, hi, extent))
    return best
