"""Uniform grids on an interval or a rectangle, Dirichlet nodal fields and quadrature.

Fields are piecewise linear.  In 1D a cell is an interval between two
neighbouring nodes.  In 2D every rectangle is split along its anti-diagonal
into two right triangles, and a *cell* is one of those triangles; the
gradient is then constant on each cell.

Quadrature is the cell-sum rule: a cell integrand is multiplied by the cell
volume, a nodal integrand is averaged over the vertices of each cell first.
For nodal integrands this is the same as weighting node ``i`` with its
lumped mass ``grid.mass[i]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class Grid:
    dimension: int
    extent: tuple[float, ...]
    nodes_per_axis: tuple[int, ...]

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.dimension}")
        if len(self.extent) != self.dimension or len(self.nodes_per_axis) != self.dimension:
            raise ValueError("extent and nodes_per_axis need one entry per axis")
        for n in self.nodes_per_axis:
            if int(n) != n or n < 3:
                raise ValueError(f"nodes_per_axis must be integers >= 3, got {self.nodes_per_axis}")
        for L in self.extent:
            if not np.isfinite(L) or L <= 0:
                raise ValueError(f"extent must be positive, got {self.extent}")

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(L / (n - 1) for L, n in zip(self.extent, self.nodes_per_axis))

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.nodes_per_axis)

    @cached_property
    def axes(self) -> tuple[np.ndarray, ...]:
        return tuple(np.linspace(0.0, L, n) for L, n in zip(self.extent, self.nodes_per_axis))

    @cached_property
    def coords(self) -> np.ndarray:
        """Node coordinates, shape ``shape + (dimension,)``."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack(mesh, axis=-1)

    @cached_property
    def boundary(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        if self.dimension == 1:
            mask[[0, -1]] = True
        else:
            mask[[0, -1], :] = True
            mask[:, [0, -1]] = True
        return mask

    @property
    def interior(self) -> np.ndarray:
        return ~self.boundary

    @property
    def n_interior(self) -> int:
        return int(self.interior.sum())

    @cached_property
    def cell_volume(self) -> float:
        vol = float(np.prod(self.spacing))
        return vol if self.dimension == 1 else 0.5 * vol

    @property
    def cell_shape(self) -> tuple[int, ...]:
        if self.dimension == 1:
            return (self.nodes_per_axis[0] - 1,)
        nx, ny = self.nodes_per_axis
        return (nx - 1, ny - 1, 2)

    @cached_property
    def cell_centers(self) -> np.ndarray:
        """Cell centroids, shape ``cell_shape + (dimension,)``."""
        if self.dimension == 1:
            x = self.axes[0]
            return (0.5 * (x[:-1] + x[1:]))[:, None]
        hx, hy = self.spacing
        x, y = self.axes
        X, Y = np.meshgrid(x[:-1], y[:-1], indexing="ij")
        lower = np.stack([X + hx / 3, Y + hy / 3], axis=-1)
        upper = np.stack([X + 2 * hx / 3, Y + 2 * hy / 3], axis=-1)
        return np.stack([lower, upper], axis=2)

    @cached_property
    def mass(self) -> np.ndarray:
        """Lumped nodal quadrature weights (sum equals the domain volume)."""
        ones = np.ones(self.cell_shape)
        return _nodal_average_T(self, ones) * self.cell_volume

    # -- conversion between full nodal arrays and interior vectors ----------

    def embed(self, interior_values: np.ndarray) -> np.ndarray:
        full = np.zeros(self.shape)
        full[self.interior] = interior_values
        return full

    def restrict(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values)[self.interior]


def build_grid(dimension: int, extent, nodes_per_axis) -> Grid:
    """Build a uniform grid; scalars are broadcast to every axis."""
    ext = tuple(float(e) for e in np.broadcast_to(np.asarray(extent, dtype=float), (dimension,)))
    nodes = tuple(int(n) for n in np.broadcast_to(np.asarray(nodes_per_axis), (dimension,)))
    if any(n < 3 for n in nodes):
        raise ValueError(f"nodes_per_axis must be >= 3, got {nodes}")
    return Grid(dimension, ext, nodes)


@dataclass(frozen=True, eq=False)
class Field:
    """Nodal values of a function vanishing on the boundary."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ValueError(f"field shape {v.shape} does not match grid {self.grid.shape}")
        if np.any(v[self.grid.boundary] != 0.0):
            raise ValueError("field must vanish on the boundary")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_interior(cls, grid: Grid, interior_values) -> "Field":
        return cls(grid, grid.embed(interior_values))

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "Field":
        """Sample ``fn(coords)`` at the nodes and zero the boundary."""
        v = np.asarray(fn(grid.coords), dtype=float).reshape(grid.shape)
        v = np.where(grid.boundary, 0.0, v)
        return cls(grid, v)

    @property
    def interior(self) -> np.ndarray:
        return self.values[self.grid.interior]

    def __mul__(self, t):
        return Field(self.grid, self.values * float(t))

    __rmul__ = __mul__

    def __add__(self, other: "Field"):
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other: "Field"):
        return Field(self.grid, self.values - other.values)

    def __neg__(self):
        return Field(self.grid, -self.values)


@dataclass(frozen=True, eq=False)
class CellField:
    """Per-cell values: scalars in 1D, 2-vectors in 2D."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        expected = self.grid.cell_shape + ((2,) if self.grid.dimension == 2 else ())
        if v.shape not in (expected, self.grid.cell_shape):
            raise ValueError(f"cell field shape {v.shape} does not match {expected}")
        object.__setattr__(self, "values", v)

    def magnitude(self) -> np.ndarray:
        """Pointwise |value| with shape ``grid.cell_shape``."""
        if self.values.shape == self.grid.cell_shape:
            return np.abs(self.values)
        return np.sqrt(np.sum(self.values**2, axis=-1))


# -- gradient and its adjoint --------------------------------------------------


def gradient_array(grid: Grid, u: np.ndarray) -> np.ndarray:
    """Cell gradients of full nodal array ``u``."""
    if grid.dimension == 1:
        return np.diff(u) / grid.spacing[0]
    hx, hy = grid.spacing
    gl = np.stack(
        [(u[1:, :-1] - u[:-1, :-1]) / hx, (u[:-1, 1:] - u[:-1, :-1]) / hy], axis=-1
    )
    gu = np.stack([(u[1:, 1:] - u[:-1, 1:]) / hx, (u[1:, 1:] - u[1:, :-1]) / hy], axis=-1)
    return np.stack([gl, gu], axis=2)


def gradient_adjoint(grid: Grid, g: np.ndarray) -> np.ndarray:
    """Transpose of :func:`gradient_array`: maps cell data back to nodes."""
    if grid.dimension == 1:
        h = grid.spacing[0]
        out = np.zeros(grid.shape)
        out[:-1] -= g / h
        out[1:] += g / h
        return out
    hx, hy = grid.spacing
    out = np.zeros(grid.shape)
    gl, gu = g[:, :, 0, :], g[:, :, 1, :]
    out[1:, :-1] += gl[..., 0] / hx
    out[:-1, :-1] -= gl[..., 0] / hx
    out[:-1, 1:] += gl[..., 1] / hy
    out[:-1, :-1] -= gl[..., 1] / hy
    out[1:, 1:] += gu[..., 0] / hx
    out[:-1, 1:] -= gu[..., 0] / hx
    out[1:, 1:] += gu[..., 1] / hy
    out[1:, :-1] -= gu[..., 1] / hy
    return out


def _nodal_average(grid: Grid, f: np.ndarray) -> np.ndarray:
    """Average of nodal ``f`` over the vertices of each cell."""
    if grid.dimension == 1:
        return 0.5 * (f[:-1] + f[1:])
    lower = (f[:-1, :-1] + f[1:, :-1] + f[:-1, 1:]) / 3.0
    upper = (f[1:, 1:] + f[:-1, 1:] + f[1:, :-1]) / 3.0
    return np.stack([lower, upper], axis=-1)


def _nodal_average_T(grid: Grid, c: np.ndarray) -> np.ndarray:
    if grid.dimension == 1:
        out = np.zeros(grid.shape)
        out[:-1] += 0.5 * c
        out[1:] += 0.5 * c
        return out
    out = np.zeros(grid.shape)
    lo, up = c[..., 0] / 3.0, c[..., 1] / 3.0
    out[:-1, :-1] += lo
    out[1:, :-1] += lo
    out[:-1, 1:] += lo
    out[1:, 1:] += up
    out[:-1, 1:] += up
    out[1:, :-1] += up
    return out


def gradient(u: Field) -> CellField:
    return CellField(u.grid, gradient_array(u.grid, u.values))


def integrate(f, grid: Grid | None = None) -> float:
    """Cell-sum quadrature of a :class:`CellField`, a :class:`Field` or a raw array.

    Raw arrays are interpreted as nodal values when their shape matches the
    grid nodes and as cell values when it matches ``grid.cell_shape``.
    """
    if isinstance(f, CellField):
        grid, vals = f.grid, f.values
        if vals.shape != grid.cell_shape:
            raise ValueError("integrate a scalar cell field (use .magnitude() for vectors)")
        return float(np.sum(vals) * grid.cell_volume)
    if isinstance(f, Field):
        grid, vals = f.grid, f.values
    else:
        if grid is None:
            raise ValueError("grid required for raw arrays")
        vals = np.asarray(f, dtype=float)
    if vals.shape == grid.shape:
        return float(np.sum(grid.mass * vals))
    if vals.shape == grid.cell_shape:
        return float(np.sum(vals) * grid.cell_volume)
    raise ValueError(f"array of shape {vals.shape} does not conform to the grid")
