import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dphase.grid import Field, build_grid, gradient
from dphase.orlicz import (
    Exponents,
    WeightSpec,
    check_muckenhoupt,
    luxemburg_norm,
    modular_report,
    modular_theta,
    modular_theta0,
    power_integral,
)

G1 = build_grid(1, 1.0, 41)
G2 = build_grid(2, (1.0, 1.0), (9, 9))


def _random_field(grid, rng, scale=1.0):
    return Field.from_interior(grid, scale * rng.standard_normal(grid.n_interior))


def test_exponents_validation():
    Exponents(3.0, 2.0)
    for p, q in [(2.0, 2.0), (2.0, 3.0), (2.0, 1.0), (math.inf, 2.0)]:
        with pytest.raises(ValueError):
            Exponents(p, q)


def test_sobolev_check_only_when_q_below_dimension():
    Exponents(10.0, 2.0).check_sobolev(1)
    Exponents(10.0, 2.0).check_sobolev(2)
    with pytest.raises(ValueError):
        Exponents(7.0, 1.5).check_sobolev(2)  # q* = 6
    Exponents(5.0, 1.5).check_sobolev(2)


def test_weight_validation():
    with pytest.raises(ValueError):
        WeightSpec("constant", (0.0,))
    with pytest.raises(ValueError):
        WeightSpec("power", (1.0, 0.5))
    with pytest.raises(ValueError):
        WeightSpec("nope", (1.0,))
    assert WeightSpec.bump(0.0, 1.0).inf_positive is False
    assert WeightSpec.power(0.5, 0.3).inf_positive is False
    assert WeightSpec.constant(2.0).inf_positive is True


def test_power_weight_zero_on_node_rejected():
    w = WeightSpec.power(0.5, 0.5)
    with pytest.raises(ValueError):
        w.validate_on(G1)  # x0 = 0.5 is a node of the 41-point grid


def test_modular_zero_field():
    z = Field(G1, np.zeros(G1.shape))
    a = WeightSpec.constant(1.0)
    assert modular_theta0(z, a, 3.0) == 0.0
    assert modular_theta(z, a, 3.0, 2.0) == 0.0
    assert luxemburg_norm(z, a, 3.0, 2.0) == 0.0


def test_modular_sine_squared():
    g = build_grid(1, 1.0, 201)
    v = Field.from_function(g, lambda x: np.sin(np.pi * x[..., 0]))
    assert abs(modular_theta0(v, WeightSpec.constant(1.0), 2.0) - 0.5) < 1e-3


def test_constant_weight_unfolds():
    rng = np.random.default_rng(1)
    v = _random_field(G2, rng)
    c = 3.5
    lhs = modular_theta(v, WeightSpec.constant(c), 3.0, 2.0)
    rhs = c * power_integral(v, 3.0) + power_integral(v, 2.0)
    assert lhs == pytest.approx(rhs, rel=1e-13)


def test_homogeneity_bookkeeping():
    rng = np.random.default_rng(2)
    a = WeightSpec.bump(0.5, 1.0)
    w = _random_field(G1, rng)
    w = w * (1.0 / luxemburg_norm(w, a, 3.0, 2.0))
    assert modular_theta(w, a, 3.0, 2.0) == pytest.approx(1.0, abs=1e-9)
    rep = modular_report(w, a, 3.0, 2.0)
    assert modular_theta(2.0 * w, a, 3.0, 2.0) == pytest.approx(8 * rep.rho_theta0 + 4 * rep.q_part, rel=1e-13)


def test_report_decomposition_exact():
    rng = np.random.default_rng(3)
    a = WeightSpec.power(0.5, (0.31, 0.47))
    v = _random_field(G2, rng)
    rep = modular_report(v, a, 3.0, 2.0)
    assert rep.rho_theta == rep.rho_theta0 + rep.q_part


def test_modular_of_gradient_uses_cells():
    rng = np.random.default_rng(4)
    v = _random_field(G1, rng)
    dv = gradient(v)
    expected = np.sum(np.abs(dv.values) ** 3) * G1.cell_volume
    assert modular_theta0(dv, WeightSpec.constant(1.0), 3.0) == pytest.approx(expected, rel=1e-13)


def test_norm_of_unit_modular_is_one():
    rng = np.random.default_rng(5)
    a = WeightSpec.constant(1.0)
    v = _random_field(G1, rng)
    n = luxemburg_norm(v, a, 3.0, 2.0)
    assert modular_theta(v * (1.0 / n), a, 3.0, 2.0) == pytest.approx(1.0, abs=1e-9)
    assert luxemburg_norm(v * (1.0 / n), a, 3.0, 2.0) == pytest.approx(1.0, abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31), st.floats(-6, 6), st.sampled_from(["constant", "bump", "power"]))
def test_sandwich_property(seed, log_scale, kind):
    rng = np.random.default_rng(seed)
    a = {"constant": WeightSpec.constant(2.0), "bump": WeightSpec.bump(0.0, 1.0),
         "power": WeightSpec.power(0.7, (0.33, 0.61))}[kind]
    v = _random_field(G2, rng, 10.0**log_scale)
    rho = modular_theta(v, a, 3.0, 2.0)
    n = luxemburg_norm(v, a, 3.0, 2.0)
    lo, hi = min(n**3, n**2), max(n**3, n**2)
    assert lo * (1 - 1e-8) <= rho <= hi * (1 + 1e-8)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.floats(-1e3, 1e3).filter(lambda t: abs(t) > 1e-3))
def test_norm_absolutely_homogeneous(seed, t):
    rng = np.random.default_rng(seed)
    a = WeightSpec.bump(0.2, 1.0)
    v = _random_field(G1, rng)
    assert luxemburg_norm(t * v, a, 3.0, 2.0) == pytest.approx(abs(t) * luxemburg_norm(v, a, 3.0, 2.0), rel=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31))
def test_modular_strictly_increasing_along_rays(seed):
    rng = np.random.default_rng(seed)
    a = WeightSpec.constant(1.0)
    v = _random_field(G1, rng)
    vals = [modular_theta(t * v, a, 3.0, 2.0) for t in np.linspace(0.0, 3.0, 13)]
    assert np.all(np.diff(vals) > 0)


def test_muckenhoupt_constant_weight_is_one():
    assert check_muckenhoupt(WeightSpec.constant(4.0), 3.0, 20) == pytest.approx(1.0, abs=1e-12)
    assert check_muckenhoupt(WeightSpec.constant(4.0), 3.0, 10, extent=(1.0, 2.0)) == pytest.approx(1.0, abs=1e-12)


def test_muckenhoupt_power_weight_analytic_centered_value():
    # centered interval around the zero of |x - x0|^g: the product is
    # (1/(g+1)) (1 - g/(p-1))^{-(p-1)}, independent of the radius
    g, p = 0.5, 3.0
    expected = (1.0 / (g + 1.0)) * (1.0 - g / (p - 1.0)) ** (-(p - 1.0))
    value = check_muckenhoupt(WeightSpec.power(g, 0.5), p, 1 + 3)
    assert value == pytest.approx(expected, rel=1e-6)


def test_muckenhoupt_power_weight_stable_and_monotone():
    w = WeightSpec.power(0.5, 0.5)
    c20, c60 = check_muckenhoupt(w, 3.0, 20), check_muckenhoupt(w, 3.0, 60)
    assert math.isfinite(c20) and c60 == pytest.approx(c20, rel=1e-3)
    values = [check_muckenhoupt(WeightSpec.power(g, 0.5), 3.0, 20) for g in (0.1, 0.3, 0.5, 0.9)]
    assert np.all(np.diff(values) > 0)


def test_muckenhoupt_requires_balls():
    with pytest.raises(ValueError):
        check_muckenhoupt(WeightSpec.constant(1.0), 3.0, 0)
