"""Minimal SVG writers for the region map and the curve plot.

Coordinates are written with a fixed number of decimals so that equal
inputs give byte-identical files.
"""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

from .eigen import SpectrumConstants
from .spectrum import CurvePoint, RegionMap, Verdict

WIDTH, HEIGHT, PAD = 640, 520, 60
STYLE = {
    Verdict.EXISTS_GLOBAL_MIN: "#ffffff",
    Verdict.EXISTS_GROUND_STATE_POS: "#ffffff",
    Verdict.EXISTS_GROUND_STATE_NEG: "#ffffff",
    Verdict.EXISTS_ON_CURVE: "#ffffff",
    Verdict.NOT_EXISTS: "url(#dots)",
    Verdict.UNKNOWN: "#d9d9d9",
}


def _f(x: float) -> str:
    return f"{x:.3f}"


class _Frame:
    def __init__(self, xlo, xhi, ylo, yhi):
        self.xlo, self.xhi, self.ylo, self.yhi = xlo, xhi, ylo, yhi

    def x(self, a: float) -> float:
        return PAD + (a - self.xlo) / (self.xhi - self.xlo) * (WIDTH - 2 * PAD)

    def y(self, b: float) -> float:
        return HEIGHT - PAD - (b - self.ylo) / (self.yhi - self.ylo) * (HEIGHT - 2 * PAD)


def _header(title: str, meta: str) -> list[str]:
    return [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f"<!-- {escape(meta)} -->",
        f"<title>{escape(title)}</title>",
        "<defs><pattern id=\"dots\" width=\"6\" height=\"6\" patternUnits=\"userSpaceOnUse\">"
        "<rect width=\"6\" height=\"6\" fill=\"#ffffff\"/><circle cx=\"3\" cy=\"3\" r=\"1.1\" fill=\"#444444\"/>"
        "</pattern></defs>",
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
    ]


def _axes(fr: _Frame) -> list[str]:
    x0, x1, y0, y1 = fr.x(fr.xlo), fr.x(fr.xhi), fr.y(fr.ylo), fr.y(fr.yhi)
    return [
        f'<rect x="{_f(x0)}" y="{_f(y1)}" width="{_f(x1 - x0)}" height="{_f(y0 - y1)}" fill="none" stroke="#000000"/>',
        f'<text x="{_f((x0 + x1) / 2)}" y="{_f(y0 + 40)}" text-anchor="middle" font-size="14">alpha</text>',
        f'<text x="{_f(x0 - 40)}" y="{_f((y0 + y1) / 2)}" text-anchor="middle" font-size="14">beta</text>',
        f'<text x="{_f(x0)}" y="{_f(y0 + 18)}" font-size="10">{fr.xlo:.4g}</text>',
        f'<text x="{_f(x1)}" y="{_f(y0 + 18)}" text-anchor="end" font-size="10">{fr.xhi:.4g}</text>',
        f'<text x="{_f(x0 - 4)}" y="{_f(y0)}" text-anchor="end" font-size="10">{fr.ylo:.4g}</text>',
        f'<text x="{_f(x0 - 4)}" y="{_f(y1 + 10)}" text-anchor="end" font-size="10">{fr.yhi:.4g}</text>',
    ]


def _reference_lines(fr: _Frame, c: SpectrumConstants) -> list[str]:
    out = []

    def vline(a, label, dash):
        if fr.xlo <= a <= fr.xhi:
            out.append(f'<line x1="{_f(fr.x(a))}" y1="{_f(fr.y(fr.ylo))}" x2="{_f(fr.x(a))}" y2="{_f(fr.y(fr.yhi))}" '
                       f'stroke="#1f4e9c" stroke-dasharray="{dash}"/>')
            out.append(f'<text x="{_f(fr.x(a) + 3)}" y="{_f(fr.y(fr.yhi) + 12)}" font-size="10" fill="#1f4e9c">{label}</text>')

    def hline(b, label, dash):
        if fr.ylo <= b <= fr.yhi:
            out.append(f'<line x1="{_f(fr.x(fr.xlo))}" y1="{_f(fr.y(b))}" x2="{_f(fr.x(fr.xhi))}" y2="{_f(fr.y(b))}" '
                       f'stroke="#1f4e9c" stroke-dasharray="{dash}"/>')
            out.append(f'<text x="{_f(fr.x(fr.xhi) - 3)}" y="{_f(fr.y(b) - 3)}" text-anchor="end" font-size="10" '
                       f'fill="#1f4e9c">{label}</text>')

    vline(c.lambda1_ap, "lambda1_a(p)", "6,3")
    hline(c.lambda1_q, "lambda1(q)", "6,3")
    vline(c.s_tilde_plus, "s~+", "2,3")
    hline(c.s_tilde_minus, "s~-", "2,3")
    # diagonals alpha - beta = s for s*_-, s*, s*_+
    for s, label in ((c.s_star_minus, "s*-"), (c.s_star, "s*"), (c.s_star_plus, "s*+")):
        pts = _clip_diagonal(fr, s)
        if pts:
            (a0, b0), (a1, b1) = pts
            out.append(f'<line x1="{_f(fr.x(a0))}" y1="{_f(fr.y(b0))}" x2="{_f(fr.x(a1))}" y2="{_f(fr.y(b1))}" '
                       f'stroke="#888888" stroke-dasharray="1,3"/>')
            out.append(f'<text x="{_f(fr.x(a1) - 2)}" y="{_f(fr.y(b1) + 10)}" text-anchor="end" font-size="9" '
                       f'fill="#888888">{label}</text>')
    return out


def _clip_diagonal(fr: _Frame, s: float):
    """Segment of beta = alpha - s inside the frame, or None."""
    if not math.isfinite(s):
        return None
    a0 = max(fr.xlo, fr.ylo + s)
    a1 = min(fr.xhi, fr.yhi + s)
    if a0 >= a1:
        return None
    return (a0, a0 - s), (a1, a1 - s)


def _curve_path(fr: _Frame, points: list[CurvePoint]) -> list[str]:
    pts = [(p.lambda_star + p.s, p.lambda_star) for p in sorted(points, key=lambda p: p.s)]
    pts = [(a, b) for a, b in pts if fr.xlo <= a <= fr.xhi and fr.ylo <= b <= fr.yhi]
    if len(pts) < 2:
        return []
    d = " ".join(f"{'M' if i == 0 else 'L'}{_f(fr.x(a))},{_f(fr.y(b))}" for i, (a, b) in enumerate(pts))
    return [f'<path d="{d}" fill="none" stroke="#000000" stroke-width="2"/>']


def _legend(x: float, y: float) -> list[str]:
    rows = [("#ffffff", "positive solution exists"), ("url(#dots)", "no positive solution"),
            ("#d9d9d9", "not settled")]
    out = []
    for i, (fill, label) in enumerate(rows):
        yy = y + 16 * i
        out.append(f'<rect x="{_f(x)}" y="{_f(yy)}" width="12" height="12" fill="{fill}" stroke="#000000"/>')
        out.append(f'<text x="{_f(x + 16)}" y="{_f(yy + 10)}" font-size="10">{label}</text>')
    return out


def region_svg(rmap: RegionMap, meta: str, curve: list[CurvePoint] | None = None) -> str:
    al, be = rmap.alpha_grid, rmap.beta_grid
    da, db = rmap.d_alpha, rmap.d_beta
    fr = _Frame(al[0] - da / 2, al[-1] + da / 2, be[0] - db / 2, be[-1] + db / 2)
    out = _header("Existence regions", meta)
    for c in rmap.cells:
        x0, x1 = fr.x(c.alpha - da / 2), fr.x(c.alpha + da / 2)
        y0, y1 = fr.y(c.beta + db / 2), fr.y(c.beta - db / 2)
        stroke = "#c00000" if c.agrees is False else "#bbbbbb"
        out.append(f'<rect x="{_f(x0)}" y="{_f(y0)}" width="{_f(x1 - x0)}" height="{_f(y1 - y0)}" '
                   f'fill="{STYLE[c.theory.verdict]}" stroke="{stroke}"/>')
        if c.numeric is not None:
            mark = {"exists": "+", "not-exists": "-", "unknown": "?"}[c.numeric]
            out.append(f'<text x="{_f((x0 + x1) / 2)}" y="{_f((y0 + y1) / 2 + 4)}" text-anchor="middle" '
                       f'font-size="11" fill="#333333">{mark}</text>')
    out += _reference_lines(fr, rmap.constants)
    if curve:
        out += _curve_path(fr, curve)
    out += _axes(fr)
    out += _legend(WIDTH - PAD - 150, 8)
    out.append("</svg>")
    return "\n".join(out) + "\n"


def curve_svg(points: list[CurvePoint], consts: SpectrumConstants, meta: str) -> str:
    A, Q = consts.lambda1_ap, consts.lambda1_q
    alphas = [p.lambda_star + p.s for p in points] + [A, consts.s_tilde_plus]
    betas = [p.lambda_star for p in points] + [Q]
    if consts.s_tilde_minus < float("inf"):
        betas.append(consts.s_tilde_minus)
    xlo, xhi = min(alphas), max(alphas)
    ylo, yhi = min(betas), max(betas)
    mx, my = 0.15 * (xhi - xlo or 1.0), 0.15 * (yhi - ylo or 1.0)
    fr = _Frame(xlo - mx, xhi + mx, ylo - my, yhi + my)
    out = _header("Existence curve", meta)
    out += _reference_lines(fr, consts)
    out += _curve_path(fr, points)
    for p in points:
        out.append(f'<circle cx="{_f(fr.x(p.lambda_star + p.s))}" cy="{_f(fr.y(p.lambda_star))}" r="2.5" '
                   f'fill="#000000"/>')
    out += _axes(fr)
    out.append("</svg>")
    return "\n".join(out) + "\n"
