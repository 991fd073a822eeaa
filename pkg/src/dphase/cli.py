"""Command-line interface: ``dphase {eig,constants,solve,curve,map}``.

A run is described by a JSON configuration file (every key optional).
Eigenpairs are cached under ``<out>/.cache`` keyed by the SHA-256 of the
canonical configuration, so later subcommands reuse them.  Outputs carry
the configuration hash and the tool version and contain no timestamps, so
identical configurations give identical bytes.

Exit codes: 0 success, 1 solver failure, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import io
import json
import math
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .eigen import EigenResult, LIReport, Spectrum, constants_from_eigenpairs, eigen_residual, li_diagnostic, \
    spectrum_constants
from .energy import ProblemParams
from .grid import Field, Grid, build_grid
from .optim import ConvergenceError, SolverOptions
from .orlicz import Exponents, WeightSpec
from .spectrum import (
    classify_theoretical,
    curve_function,
    detect_existence,
    picone_certificate,
    probe_axes,
    region_map,
    trace_curve,
)
from .svg import curve_svg, region_svg

TOOL = "dphase"


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


# -- configuration ------------------------------------------------------------------------


@dataclass(frozen=True)
class GridConfig:
    dimension: int = 1
    extent: tuple[float, ...] = (1.0,)
    nodes: tuple[int, ...] = (101,)


@dataclass(frozen=True)
class WeightConfig:
    kind: str = "constant"
    params: tuple[float, ...] = (1.0,)


@dataclass(frozen=True)
class CurveConfig:
    s_min: float | None = None  # default: s* - 2
    s_max: float | None = None  # default: s*_+ + 2
    n_points: int = 15


@dataclass(frozen=True)
class MapConfig:
    alpha_range: tuple[float, float] | None = None  # default: probe axes around lambda1_ap
    beta_range: tuple[float, float] | None = None
    resolution: int = 9
    use_curve: bool = False


@dataclass(frozen=True)
class RunConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    p: float = 3.0
    q: float = 2.0
    weight: WeightConfig = field(default_factory=WeightConfig)
    solver: SolverOptions = field(default_factory=SolverOptions)
    curve: CurveConfig = field(default_factory=CurveConfig)
    map: MapConfig = field(default_factory=MapConfig)
    output: str = "out"

    # -- (de)serialization --

    def to_dict(self) -> dict:
        return _to_plain(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
        cfg = _from_plain(cls, data, "config")
        cfg.validate()
        return cfg

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def numerics_hash(self) -> str:
        """SHA-256 over every field except the output directory."""
        d = self.to_dict()
        d.pop("output")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    # -- domain objects --

    def validate(self) -> None:
        try:
            self.build_grid()
            self.exponents().check_sobolev(self.grid.dimension)
            self.weight_spec()
            if self.solver.restarts < 1 or self.solver.tol <= 0 or self.solver.max_iter < 1:
                raise ValueError("solver needs restarts >= 1, tol > 0 and max_iter >= 1")
            if self.curve.n_points < 2:
                raise ValueError("curve.n_points must be at least 2")
            if self.map.resolution < 2:
                raise ValueError("map.resolution must be at least 2")
            for name in ("alpha_range", "beta_range"):
                r = getattr(self.map, name)
                if r is not None and (len(r) != 2 or not r[0] < r[1]):
                    raise ValueError(f"map.{name} must be [low, high] with low < high")
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def build_grid(self) -> Grid:
        g = self.grid
        return build_grid(g.dimension, g.extent, g.nodes)

    def exponents(self) -> Exponents:
        return Exponents(self.p, self.q)

    def weight_spec(self) -> WeightSpec:
        return WeightSpec(self.weight.kind, self.weight.params)


def _to_plain(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, tuple):
        return [_to_plain(v) for v in obj]
    return obj


_NESTED = {"grid": GridConfig, "weight": WeightConfig, "solver": SolverOptions, "curve": CurveConfig,
           "map": MapConfig}


def _coerce(value, default, where: str):
    """Convert a JSON value to the type of ``default`` (None defaults accept numbers or lists)."""
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer")
        return value
    if isinstance(default, float) or default is None and isinstance(value, (int, float)):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string")
        return value
    if isinstance(default, tuple) or default is None:
        if value is None:
            return None
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected a list")
        proto = default[0] if default else 0.0
        return tuple(_coerce(v, proto, f"{where}[{i}]") for i, v in enumerate(value))
    raise ConfigError(f"{where}: unsupported value")


def _from_plain(cls, data: dict, where: str):
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(names))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")
    base = cls()
    kw = {}
    for k, v in data.items():
        sub = where + "." + k
        if k in _NESTED and cls is RunConfig:
            if not isinstance(v, dict):
                raise ConfigError(f"{sub}: expected an object")
            kw[k] = _from_plain(_NESTED[k], v, sub)
        else:
            kw[k] = _coerce(v, getattr(base, k), sub)
    try:
        return cls(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def load_config(path: str | os.PathLike | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return RunConfig.from_dict(data)


# -- atomic writers -----------------------------------------------------------------------


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix="." + path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _num(x):
    """JSON-safe number: infinities and NaN become strings."""
    if x is None:
        return None
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


class Writer:
    """Stamps every output with the tool version and configuration hash."""

    def __init__(self, out: Path, cfg: RunConfig):
        self.out = out
        self.hash = cfg.numerics_hash()
        self.meta = f"{TOOL} {__version__} config_hash={self.hash}"

    def json(self, name: str, payload: dict) -> Path:
        doc = {"tool": TOOL, "version": __version__, "config_hash": self.hash, **payload}
        path = self.out / name
        _atomic_write(path, (json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n").encode())
        return path

    def csv(self, name: str, header: list[str], rows) -> Path:
        buf = io.StringIO()
        buf.write(f"# {self.meta}\n")
        buf.write(",".join(header) + "\n")
        for row in rows:
            buf.write(",".join(_cell(v) for v in row) + "\n")
        path = self.out / name
        _atomic_write(path, buf.getvalue().encode())
        return path

    def text(self, name: str, text: str) -> Path:
        path = self.out / name
        _atomic_write(path, text.encode())
        return path


def _cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


# -- eigenpair cache ------------------------------------------------------------------------


def _cache_path(out: Path, cfg: RunConfig) -> Path:
    return out / ".cache" / f"{cfg.numerics_hash()}.npz"


def load_or_compute_spectrum(cfg: RunConfig, out: Path, log=None) -> tuple[Spectrum, bool]:
    """Return the spectrum for ``cfg`` and whether it came from the cache."""
    grid, exps, w = cfg.build_grid(), cfg.exponents(), cfg.weight_spec()
    path = _cache_path(out, cfg)
    if path.exists():
        try:
            with np.load(path, allow_pickle=False) as z:
                meta = json.loads(str(z["meta"]))
                if meta.get("config_hash") == cfg.numerics_hash():
                    pa = _eigen_from_cache(grid, w, exps.p, z["phi_pa"], meta["pa"])
                    eq = _eigen_from_cache(grid, WeightSpec.constant(1.0), exps.q, z["phi_q"], meta["q"])
                    consts = constants_from_eigenpairs(pa, eq, exps, w, cfg.solver.overflow_guard)
                    return Spectrum(exps, w, grid, pa, eq, consts), True
        except (OSError, KeyError, ValueError):
            pass  # unreadable entry: recompute and overwrite
    spec = spectrum_constants(exps.p, exps.q, w, grid, cfg.solver)
    meta = {
        "config_hash": cfg.numerics_hash(),
        "version": __version__,
        "created": time.time(),
        "pa": {"lam": spec.pa.lam, "restarts": spec.pa.restarts_used},
        "q": {"lam": spec.q.lam, "restarts": spec.q.restarts_used},
    }
    buf = io.BytesIO()
    np.savez(buf, phi_pa=spec.pa.phi.values, phi_q=spec.q.phi.values, meta=np.array(json.dumps(meta)))
    _atomic_write(path, buf.getvalue())
    return spec, False


def _eigen_from_cache(grid: Grid, w: WeightSpec, r: float, values: np.ndarray, meta: dict) -> EigenResult:
    phi = Field(grid, values)
    return EigenResult(lam=float(meta["lam"]), phi=phi, residual=eigen_residual(w, r, phi),
                       restarts_used=int(meta["restarts"]), weight=w, r=r)


# -- subcommands ---------------------------------------------------------------------------


def _coords_header(grid: Grid) -> list[str]:
    return ["x", "y"][: grid.dimension]


def _coord_rows(grid: Grid, *columns):
    coords = grid.coords.reshape(-1, grid.dimension)
    cols = [np.asarray(c).reshape(-1) for c in columns]
    for i in range(coords.shape[0]):
        yield [float(v) for v in coords[i]] + [float(c[i]) for c in cols]


def _constants_payload(spec: Spectrum, li: LIReport) -> dict:
    c = spec.constants
    return {
        "constants": {k: _num(v) for k, v in dataclasses.asdict(c).items()},
        "li": {"holds": li.holds, "best_k": _num(li.best_k), "alignment_residual": _num(li.alignment_residual),
               "threshold": _num(li.threshold)},
    }


def cmd_eig(cfg: RunConfig, out: Path, log) -> int:
    spec, hit = load_or_compute_spectrum(cfg, out)
    log(f"eigenpairs {'served from cache' if hit else 'computed'}")
    w = Writer(out, cfg)
    w.json("eig.json", {
        "lambda1_ap": _num(spec.pa.lam),
        "lambda1_q": _num(spec.q.lam),
        "residual_ap": _num(spec.pa.residual),
        "residual_q": _num(spec.q.residual),
        "restarts": spec.pa.restarts_used,
        "p": cfg.p,
        "q": cfg.q,
    })
    grid = spec.grid
    w.csv("eigenfunctions.csv", _coords_header(grid) + ["phi_pa", "phi_q"],
          _coord_rows(grid, spec.pa.phi.values, spec.q.phi.values))
    return 0


def cmd_constants(cfg: RunConfig, out: Path, log) -> int:
    spec, _ = load_or_compute_spectrum(cfg, out)
    li = li_diagnostic(spec.pa.phi, spec.q.phi, cfg.solver.li_threshold)
    c = spec.constants
    scale = max(abs(c.lambda1_ap), abs(c.lambda1_q), 1.0)
    bad = c.ordering_violations(tol=1e-9 * scale)
    if bad:
        log("ordering check failed: " + "; ".join(bad))
        return 1
    Writer(out, cfg).json("constants.json", _constants_payload(spec, li))
    return 0


def _result_payload(r) -> dict | None:
    if r is None:
        return None
    return {
        "energy": _num(r.energy), "grad_norm": _num(r.grad_norm), "nontrivial": r.nontrivial,
        "positive_interior": r.positive_interior, "on_nehari": r.on_nehari, "iterations": r.iterations,
        "status": r.status, "method": r.method, "norm_theta": _num(r.norm_theta), "H": _num(r.H),
        "G": _num(r.G), "seed": r.seed,
    }


def cmd_solve(cfg: RunConfig, out: Path, log, alpha: float, beta: float) -> int:
    spec, _ = load_or_compute_spectrum(cfg, out)
    li = li_diagnostic(spec.pa.phi, spec.q.phi, cfg.solver.li_threshold)
    det = detect_existence(alpha, beta, spec, cfg.solver)
    theory = classify_theoretical(alpha, beta, spec.constants, li, inf_positive=spec.weight.inf_positive)
    params = ProblemParams(spec.exponents, spec.weight, alpha, beta)
    r = det.result
    picone = None
    if r is not None and r.nontrivial and r.positive_interior:
        rep = picone_certificate(r, params, spec.q.phi)
        picone = {"lhs": _num(rep.lhs), "rhs": _num(rep.rhs), "relative_gap": _num(rep.relative_gap),
                  "tol": rep.tol, "passes": rep.passes}
    w = Writer(out, cfg)
    w.json("solve.json", {
        "alpha": alpha, "beta": beta, "seed": cfg.solver.seed,
        "numeric_verdict": det.verdict, "runs": det.runs,
        "theory": {"verdict": theory.verdict.value, "source": theory.source},
        "result": _result_payload(r), "picone": picone,
    })
    if r is not None:
        w.csv("solution.csv", _coords_header(spec.grid) + ["u"], _coord_rows(spec.grid, r.u.values))
    if det.verdict == "unknown":
        log("solvers failed: " + json.dumps(det.runs))
        return 1
    return 0


def _curve_range(cfg: RunConfig, spec: Spectrum) -> tuple[float, float]:
    c = spec.constants
    lo = cfg.curve.s_min if cfg.curve.s_min is not None else c.s_star - 2.0
    hi = cfg.curve.s_max if cfg.curve.s_max is not None else c.s_star_plus + 2.0
    return lo, hi


def cmd_curve(cfg: RunConfig, out: Path, log) -> int:
    spec, _ = load_or_compute_spectrum(cfg, out)
    lo, hi = _curve_range(cfg, spec)
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise ConfigError(f"empty s-range [{lo}, {hi}]")
    trace = trace_curve(lo, hi, cfg.curve.n_points, spec, cfg.solver)
    w = Writer(out, cfg)
    w.csv("curve.csv", ["s", "lambda_star", "bracket_width", "lower", "upper", "certificate"],
          ([p.s, p.lambda_star, p.bracket_width, p.lower, p.upper, "|".join(p.certificate)] for p in trace.points))
    w.json("curve.json", {
        "s_range": [lo, hi], "n_points": cfg.curve.n_points, "tol": trace.tol,
        "lambda_nonincreasing": trace.lambda_nonincreasing, "sum_nondecreasing": trace.sum_nondecreasing,
        "failures": {repr(k): v for k, v in sorted(trace.failures.items())},
        **_constants_payload(spec, li_diagnostic(spec.pa.phi, spec.q.phi, cfg.solver.li_threshold)),
    })
    w.text("curve.svg", curve_svg(trace.points, spec.constants, w.meta))
    if trace.failures:
        log(f"{len(trace.failures)} curve point(s) failed")
        return 1 if not trace.points else 0
    return 0


def cmd_map(cfg: RunConfig, out: Path, log, numeric: bool, jobs: int) -> int:
    spec, _ = load_or_compute_spectrum(cfg, out)
    li = li_diagnostic(spec.pa.phi, spec.q.phi, cfg.solver.li_threshold)
    mc = cfg.map
    al, be = probe_axes(spec.constants, half=(mc.resolution - 1) // 2)
    if mc.alpha_range is not None or mc.resolution % 2 == 0:
        a0, a1 = mc.alpha_range or (al[0], al[-1])
        al = np.linspace(a0, a1, mc.resolution)
    if mc.beta_range is not None or mc.resolution % 2 == 0:
        b0, b1 = mc.beta_range or (be[0], be[-1])
        be = np.linspace(b0, b1, mc.resolution)
    curve_pts = None
    curve = None
    if mc.use_curve:
        lo, hi = _curve_range(cfg, spec)
        trace = trace_curve(lo, hi, cfg.curve.n_points, spec, cfg.solver)
        curve_pts = trace.points
        curve = curve_function(curve_pts, spec.constants)
    rmap = region_map(al, be, spec, li, cfg.solver, numeric=numeric, curve=curve, jobs=jobs)
    w = Writer(out, cfg)
    w.csv("region.csv", ["alpha", "beta", "theory_verdict", "numeric_verdict", "flags"],
          ([c.alpha, c.beta, c.theory.verdict.value, c.numeric or "skipped",
            "|".join(((("band",) if c.in_band else ()) + c.flags)) or "-"] for c in rmap.cells))
    w.json("disagreements.json", {
        "numeric": numeric,
        "cells": [{"alpha": c.alpha, "beta": c.beta, "theory": c.theory.verdict.value, "source": c.theory.source,
                   "numeric": c.numeric, "flags": list(c.flags), "energy": _num(c.energy)}
                  for c in rmap.disagreements()],
        "checked": sum(1 for c in rmap.cells if c.checked),
        **_constants_payload(spec, li),
    })
    w.text("region.svg", region_svg(rmap, w.meta, curve_pts))
    return 0


# -- entry point ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog=TOOL, description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"{TOOL} {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, helptext in (("eig", "first eigenpairs"), ("constants", "threshold constants and (LI) report"),
                           ("solve", "solve at one (alpha, beta)"), ("curve", "trace lambda*(s)"),
                           ("map", "region map on an (alpha, beta) grid")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--config", help="JSON configuration file (defaults apply to missing keys)")
        sp.add_argument("--out", help="output directory (overrides config.output)")
        sp.add_argument("--seed", type=int, help="overrides solver.seed")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
        if name == "solve":
            sp.add_argument("--alpha", type=float, required=True)
            sp.add_argument("--beta", type=float, required=True)
        if name == "map":
            sp.add_argument("--no-numeric", action="store_true", help="theory verdicts only")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)

    def log(msg: str) -> None:
        print(f"{TOOL}: {msg}", file=sys.stderr)

    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = dataclasses.replace(cfg, solver=cfg.solver.with_(seed=args.seed))
        if args.out is not None:
            cfg = dataclasses.replace(cfg, output=args.out)
        if args.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        out = Path(cfg.output)
        if args.command == "eig":
            return cmd_eig(cfg, out, log)
        if args.command == "constants":
            return cmd_constants(cfg, out, log)
        if args.command == "solve":
            return cmd_solve(cfg, out, log, args.alpha, args.beta)
        if args.command == "curve":
            return cmd_curve(cfg, out, log)
        return cmd_map(cfg, out, log, numeric=not args.no_numeric, jobs=args.jobs)
    except ConfigError as exc:
        log(f"configuration error: {exc}")
        return 2
    except ConvergenceError as exc:
        log(f"solver failure: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
