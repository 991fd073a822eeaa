import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import eigh_tridiagonal

from dphase.eigen import (
    constants_from_eigenpairs,
    first_eigenpair,
    li_diagnostic,
    rayleigh_quotient,
    spectrum_constants,
)
from dphase.grid import Field, build_grid
from dphase.optim import SolverOptions
from dphase.orlicz import WeightSpec

ONE = WeightSpec.constant(1.0)


def tridiagonal_oracle(n: int) -> float:
    """Smallest eigenvalue of the lumped-mass P1 Laplacian on n nodes of (0, 1)."""
    h = 1.0 / (n - 1)
    m = n - 2
    w = eigh_tridiagonal(np.full(m, 2.0), np.full(m - 1, -1.0), eigvals_only=True, select="i", select_range=(0, 0))
    return float(w[0]) / h**2


def test_rayleigh_zero_field_rejected():
    g = build_grid(1, 1.0, 11)
    with pytest.raises(ValueError):
        rayleigh_quotient(ONE, 2.0, Field(g, np.zeros(11)))


def test_hat_quotient_lumped():
    # slopes +-2 on two cells of width 1/2 give int |v'|^2 = 4; the lumped mass of the
    # middle node is 1/2, so R = 8 (the consistent P1 mass would give 1/3 and R = 12)
    g = build_grid(1, 1.0, 3)
    hat = Field(g, np.array([0.0, 1.0, 0.0]))
    assert rayleigh_quotient(ONE, 2.0, hat) == pytest.approx(8.0, rel=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.floats(-50, 50).filter(lambda t: abs(t) > 1e-3), st.sampled_from([1.5, 2.0, 3.0]))
def test_rayleigh_zero_homogeneous_and_constant_weight_cancels(seed, t, r):
    g = build_grid(2, 1.0, 7)
    v = Field.from_interior(g, np.random.default_rng(seed).standard_normal(g.n_interior))
    base = rayleigh_quotient(ONE, r, v)
    assert rayleigh_quotient(ONE, r, t * v) == pytest.approx(base, rel=1e-12)
    assert rayleigh_quotient(WeightSpec.constant(7.3), r, v) == pytest.approx(base, rel=1e-12)


def test_eigenvalue_r2_matches_tridiagonal_oracle():
    g = build_grid(1, 1.0, 201)
    res = first_eigenpair(ONE, 2.0, g)
    oracle = tridiagonal_oracle(201)
    assert abs(res.lam - oracle) / oracle < 1e-6
    assert abs(oracle - math.pi**2) / math.pi**2 < 1e-3


def test_eigenfunction_positive_and_sup_normalized():
    g = build_grid(2, 1.0, 15)
    res = first_eigenpair(ONE, 3.0, g)
    assert np.all(res.phi.interior > 0)
    assert np.max(res.phi.values) == pytest.approx(1.0, abs=1e-15)
    assert res.residual < 1e-5


def test_constant_weight_five_equals_one():
    g = build_grid(1, 1.0, 61)
    for r in (2.0, 3.0):
        a = first_eigenpair(ONE, r, g).lam
        b = first_eigenpair(WeightSpec.constant(5.0), r, g).lam
        assert b == pytest.approx(a, rel=1e-7)


def test_minimality_against_random_fields():
    g = build_grid(1, 1.0, 51)
    res = first_eigenpair(WeightSpec.bump(0.5, 1.0), 3.0, g)
    rng = np.random.default_rng(9)
    for _ in range(100):
        v = Field.from_interior(g, rng.standard_normal(g.n_interior) + 0.5 * res.phi.interior)
        assert rayleigh_quotient(res.weight, 3.0, v) >= res.lam - 1e-6


def test_refinement_differences_shrink():
    lams = [first_eigenpair(ONE, 2.0, build_grid(1, 1.0, n)).lam for n in (51, 101, 201, 401)]
    d = np.abs(np.diff(lams))
    assert np.all(np.diff(d) < 0)


def test_invalid_inputs():
    g = build_grid(1, 1.0, 11)
    with pytest.raises(ValueError):
        first_eigenpair(ONE, 1.0, g)
    with pytest.raises(ValueError):
        first_eigenpair(ONE, 2.0, g, SolverOptions(restarts=0))


def test_constants_p3_q2_finite_and_ordered(spec101):
    c = spec101.constants
    for v in (c.lambda1_ap, c.lambda1_q, c.s_tilde_minus, c.s_tilde_plus, c.s_star, c.s_star_minus, c.s_star_plus):
        assert math.isfinite(v)
    assert c.ordering_violations() == []
    assert c.s_star == c.lambda1_ap - c.lambda1_q
    assert c.s_star_plus == c.s_tilde_plus - c.lambda1_q
    assert c.s_star_minus == c.lambda1_ap - c.s_tilde_minus


def test_constants_close_exponents_give_small_s_star():
    g = build_grid(1, 1.0, 101)
    near = spectrum_constants(2.05, 2.0, ONE, g).constants
    far = spectrum_constants(3.0, 2.0, ONE, g).constants
    assert 0 < near.s_star < 0.1 * far.s_star
    assert near.ordering_violations(1e-9) == []


def test_overflow_guard_gives_infinite_s_tilde_minus(spec101):
    c = constants_from_eigenpairs(spec101.pa, spec101.q, spec101.exponents, spec101.weight, overflow_guard=1e-3)
    assert c.s_tilde_minus == math.inf
    assert c.s_star_minus == -math.inf


def test_li_collinear_fields(spec101):
    rep = li_diagnostic(3.0 * spec101.q.phi, spec101.q.phi)
    assert not rep.holds
    assert rep.best_k == pytest.approx(3.0, rel=1e-14)
    assert rep.alignment_residual < 1e-12


def test_li_sine_vs_hat_and_infinite_threshold():
    g = build_grid(1, 1.0, 101)
    sine = Field.from_function(g, lambda x: np.sin(np.pi * x[..., 0]))
    hat = Field.from_function(g, lambda x: 1.0 - np.abs(2.0 * x[..., 0] - 1.0))
    assert li_diagnostic(sine, hat).holds
    assert not li_diagnostic(sine, hat, threshold=math.inf).holds


def test_li_zero_field_rejected():
    g = build_grid(1, 1.0, 11)
    z = Field(g, np.zeros(11))
    with pytest.raises(ValueError):
        li_diagnostic(z, z)


def test_li_holds_for_p3_q2(li101):
    assert li101.holds
    assert li101.alignment_residual > 10 * li101.threshold
