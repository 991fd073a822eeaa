import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dphase.grid import CellField, Field, Grid, build_grid, gradient, gradient_adjoint, gradient_array, integrate


def test_build_grid_three_nodes():
    g = build_grid(1, 1.0, 3)
    assert g.n_interior == 1
    assert g.spacing == (0.5,)


def test_build_grid_spacing_201():
    assert build_grid(1, 1.0, 201).spacing[0] == pytest.approx(0.005, abs=1e-15)


@pytest.mark.parametrize("args", [(2, (1.0, 1.0), 2), (1, 1.0, 1), (1, 0.0, 5), (1, -1.0, 5), (3, 1.0, 5)])
def test_build_grid_rejects(args):
    with pytest.raises(ValueError):
        build_grid(*args)


def test_boundary_nonempty_2d():
    g = build_grid(2, (1.0, 2.0), (5, 7))
    assert g.boundary.sum() == 2 * 5 + 2 * 7 - 4
    assert g.spacing == (0.25, 2.0 / 6)


def test_field_rejects_nonzero_boundary():
    g = build_grid(1, 1.0, 5)
    with pytest.raises(ValueError):
        Field(g, np.ones(5))


def test_gradient_of_zero():
    g = build_grid(2, 1.0, 6)
    assert np.all(gradient(Field(g, np.zeros(g.shape))).values == 0.0)


def test_hat_slopes():
    g = build_grid(1, 1.0, 3)
    u = Field(g, np.array([0.0, 1.0, 0.0]))
    np.testing.assert_array_equal(gradient(u).values, [2.0, -2.0])


def test_sine_gradient_second_order():
    g = build_grid(1, 1.0, 201)
    u = Field.from_function(g, lambda x: np.sin(np.pi * x[..., 0]))
    mid = g.cell_centers[:, 0]
    err = np.max(np.abs(gradient(u).values - np.pi * np.cos(np.pi * mid)))
    h = g.spacing[0]
    assert err < np.pi**3 / 24 * h**2 * 1.01


def test_integrate_constant_and_affine():
    g = build_grid(1, 1.0, 11)
    assert integrate(np.ones(11), g) == pytest.approx(1.0, abs=1e-15)
    assert integrate(g.axes[0], g) == pytest.approx(0.5, abs=1e-15)
    g2 = build_grid(2, (2.0, 3.0), (7, 5))
    assert integrate(np.ones(g2.shape), g2) == pytest.approx(6.0, rel=1e-14)
    assert integrate(np.ones(g2.cell_shape), g2) == pytest.approx(6.0, rel=1e-14)


def test_integrate_sin_squared():
    g = build_grid(1, 1.0, 201)
    assert abs(integrate(np.sin(np.pi * g.axes[0]) ** 2, g) - 0.5) < 1e-4


def test_integrate_cellfield_vector_rejected():
    g = build_grid(2, 1.0, 4)
    with pytest.raises(ValueError):
        integrate(CellField(g, np.zeros(g.cell_shape + (2,))))


def test_gradient_2d_linear_exact():
    g = build_grid(2, (1.0, 2.0), (5, 9))
    X, Y = g.coords[..., 0], g.coords[..., 1]
    G = gradient_array(g, 3.0 * X - 2.0 * Y)
    np.testing.assert_allclose(G[..., 0], 3.0, atol=1e-12)
    np.testing.assert_allclose(G[..., 1], -2.0, atol=1e-12)


@pytest.mark.parametrize("dim", [1, 2])
def test_gradient_adjoint_is_transpose(dim):
    g = build_grid(dim, 1.0, 6)
    rng = np.random.default_rng(0)
    u = rng.standard_normal(g.shape)
    c = rng.standard_normal(gradient_array(g, u).shape)
    lhs = np.sum(gradient_array(g, u) * c)
    rhs = np.sum(u * gradient_adjoint(g, c))
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_mass_sums_to_volume():
    g = build_grid(2, (1.5, 0.5), (6, 4))
    assert g.mass.sum() == pytest.approx(0.75, rel=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.floats(-5, 5), st.floats(-5, 5))
def test_integrate_linear(seed, a, b):
    g = build_grid(2, 1.0, 7)
    rng = np.random.default_rng(seed)
    f, h = rng.standard_normal(g.shape), rng.standard_normal(g.shape)
    lhs = integrate(a * f + b * h, g)
    rhs = a * integrate(f, g) + b * integrate(h, g)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.floats(-10, 10), st.sampled_from([1, 2]))
def test_gradient_scaling_and_constants(seed, t, dim):
    g = build_grid(dim, 1.0, 6)
    rng = np.random.default_rng(seed)
    u = Field.from_interior(g, rng.standard_normal(g.n_interior))
    np.testing.assert_array_equal(gradient(t * u).values, gradient_array(g, u.values * float(t)))
    # constants are annihilated away from the boundary cells
    c = gradient_array(g, np.full(g.shape, t))
    assert np.all(c == 0.0)


def test_grid_is_hashable_and_immutable():
    g = build_grid(1, 1.0, 5)
    assert hash(g) == hash(Grid(1, (1.0,), (5,)))
    u = Field(g, np.zeros(5))
    with pytest.raises(ValueError):
        u.values[1] = 1.0
