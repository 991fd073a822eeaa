"""Discrete power integrals and their exact nodal derivatives.

All energies are sums of two kinds of terms,

    gradient term:  sum_cells  vol * w_c * |grad u|_c ** r
    mass term:      sum_nodes  m_i * w_i * |u_i| ** r

and their derivatives are obtained by differentiating these sums, never
by discretizing a differential operator.
"""
from __future__ import annotations

import numpy as np

from .grid import Grid, gradient_adjoint, gradient_array


def _signed_power(x: np.ndarray, e: float) -> np.ndarray:
    """sign(x) |x|**e, defined as 0 at x = 0."""
    return np.sign(x) * np.abs(x) ** e


def grad_term(grid: Grid, u: np.ndarray, w_cells, r: float, need_grad: bool = True):
    g = gradient_array(grid, u)
    vol = grid.cell_volume
    if grid.dimension == 1:
        val = float(np.sum(w_cells * np.abs(g) ** r) * vol)
        if not need_grad:
            return val, None
        flux = r * vol * w_cells * _signed_power(g, r - 1.0)
    else:
        mag = np.sqrt(np.sum(g * g, axis=-1))
        val = float(np.sum(w_cells * mag**r) * vol)
        if not need_grad:
            return val, None
        with np.errstate(divide="ignore", invalid="ignore"):
            fac = np.where(mag > 0, mag ** (r - 2.0), 0.0)
        flux = (r * vol * w_cells * fac)[..., None] * g
    return val, gradient_adjoint(grid, flux)


def mass_term(grid: Grid, u: np.ndarray, w_nodes, r: float, need_grad: bool = True):
    mw = grid.mass * w_nodes
    val = float(np.sum(mw * np.abs(u) ** r))
    if not need_grad:
        return val, None
    return val, r * mw * _signed_power(u, r - 1.0)


def dual_norm(grid: Grid, g_interior: np.ndarray) -> float:
    """Discrete dual norm sqrt(sum g_i^2 / m_i) of a nodal derivative (interior nodes)."""
    m = grid.mass[grid.interior]
    return float(np.sqrt(np.sum(g_interior**2 / m)))
