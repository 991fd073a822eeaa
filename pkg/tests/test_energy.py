import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dphase.energy import (
    EnergyModel,
    G_beta,
    H_alpha,
    ProblemParams,
    energy,
    energy_gradient,
    fibering_start,
    minimize_global,
    truncated_minimize,
    truncated_model,
)
from dphase.grid import Field, build_grid
from dphase.orlicz import Exponents, WeightSpec
from dphase.spectrum import detect_existence

G2 = build_grid(2, (1.0, 1.0), (8, 8))
P2 = ProblemParams(Exponents(3.0, 2.0), WeightSpec.bump(0.3, 1.0), 4.0, 7.0)


def _rand(grid, rng, scale=1.0):
    return Field.from_interior(grid, scale * rng.standard_normal(grid.n_interior))


def test_zero_field():
    z = Field(G2, np.zeros(G2.shape))
    assert H_alpha(z, P2) == 0.0
    assert G_beta(z, P2) == 0.0
    assert energy(z, P2) == 0.0
    assert np.all(energy_gradient(z, P2).values == 0.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.floats(-20, 20).filter(lambda t: abs(t) > 1e-3))
def test_homogeneities(seed, t):
    u = _rand(G2, np.random.default_rng(seed))
    assert H_alpha(t * u, P2) == pytest.approx(abs(t) ** 3 * H_alpha(u, P2), rel=1e-11, abs=1e-300)
    assert G_beta(t * u, P2) == pytest.approx(t**2 * G_beta(u, P2), rel=1e-11, abs=1e-300)


def test_energy_recomposes():
    rng = np.random.default_rng(0)
    for _ in range(10):
        u = _rand(G2, rng)
        assert energy(u, P2) == pytest.approx(H_alpha(u, P2) / 3.0 + G_beta(u, P2) / 2.0, rel=1e-13)


def test_nehari_identity_on_random_fields():
    rng = np.random.default_rng(1)
    for _ in range(100):
        u = _rand(G2, rng, 10.0 ** rng.uniform(-2, 2))
        lhs = float(np.sum(energy_gradient(u, P2).values * u.values))
        H, G = H_alpha(u, P2), G_beta(u, P2)
        assert abs(lhs - (H + G)) <= 1e-10 * (abs(H) + abs(G))


def test_eigenpairs_annihilate_their_functional(spec101, base101):
    c = spec101.constants
    phi_pa, phi_q = spec101.pa.phi, spec101.q.phi
    ref_p = EnergyModel(phi_pa.grid, base101).parts(phi_pa.values, need_grad=False).P_grad
    ref_q = EnergyModel(phi_q.grid, base101).parts(phi_q.values, need_grad=False).Q_grad
    assert abs(H_alpha(phi_pa, base101.shifted(c.lambda1_ap, 0.0))) < 1e-12 * ref_p
    assert abs(G_beta(phi_q, base101.shifted(0.0, c.lambda1_q))) < 1e-12 * ref_q


def test_energy_negative_along_small_multiples_of_phi_q(spec101, base101):
    c = spec101.constants
    params = base101.shifted(c.lambda1_ap - 1.0, c.lambda1_q + 1.0)
    for t in (1e-3, 1e-2):
        assert energy(t * spec101.q.phi, params) < 0


def test_gradient_matches_central_differences_2d():
    rng = np.random.default_rng(2)
    for _ in range(5):
        u, d = _rand(G2, rng), _rand(G2, rng)
        h = 1e-6
        fd = (energy(u + h * d, P2) - energy(u - h * d, P2)) / (2 * h)
        an = float(np.sum(energy_gradient(u, P2).values * d.values))
        assert abs(fd - an) <= 1e-6 * max(abs(an), 1e-12)


def test_global_minimizer_in_normalize_region(spec101, base101):
    c = spec101.constants
    params = base101.shifted(c.lambda1_ap - 1.0, c.lambda1_q + 1.0)
    r = minimize_global(params, spec101)
    assert r.nontrivial and r.positive_interior and r.energy < 0
    assert r.grad_norm <= 1e-6
    model = EnergyModel(spec101.grid, params)
    phi = spec101.grid.restrict(spec101.q.phi.values)
    t = fibering_start(model, spec101.grid.embed(phi))
    assert r.energy <= model.energy(spec101.grid.embed(t * phi))


def test_global_descent_collapses_below_both_eigenvalues(spec101, base101):
    c = spec101.constants
    r = minimize_global(base101.shifted(c.lambda1_ap - 1.0, c.lambda1_q - 1.0), spec101)
    assert not r.nontrivial
    assert r.status == "collapsed"


def test_accepted_results_are_positive(spec101, base101):
    c = spec101.constants
    for da, db in [(-1.0, 1.0), (-5.0, 3.0), (-0.5, 0.2)]:
        r = minimize_global(base101.shifted(c.lambda1_ap + da, c.lambda1_q + db), spec101)
        if r.nontrivial and r.grad_norm <= 1e-6:
            assert r.positive_interior


def test_truncated_zero_supersolution(spec101, base101):
    z = Field(spec101.grid, np.zeros(spec101.grid.shape))
    r = truncated_minimize(10.0, 18.0, z, base101, spec101)
    assert not r.nontrivial
    assert np.all(r.u.values == 0.0)


def test_truncated_rejects_negative_supersolution(spec101, base101):
    with pytest.raises(ValueError):
        truncated_minimize(10.0, 18.0, -1.0 * spec101.q.phi, base101, spec101)


def test_truncated_problem_solves_untruncated_problem(spec101, base101):
    # a solution at (nu + s', nu) with s' > s is a super-solution for (nu + s, nu)
    nu, s_super, s = 10.1, 18.3, 18.2
    sup = detect_existence(nu + s_super, nu, spec101)
    assert sup.verdict == "exists"
    r = truncated_minimize(nu, s, sup.result.u, base101, spec101)
    assert r.nontrivial and r.positive_interior
    assert r.notes["below_super"]
    assert np.all(r.u.values <= sup.result.u.values + 1e-14)
    assert r.grad_norm <= 1e-6


def test_truncated_functional_is_coercive(spec101, base101):
    w = spec101.q.phi
    _, objective, _ = truncated_model(10.0, 18.0, w, base101)
    rng = np.random.default_rng(3)
    grid = spec101.grid
    for _ in range(10):
        v = grid.embed(rng.standard_normal(grid.n_interior))
        vals = [objective(t * v)[0] for t in (1.0, 10.0, 100.0, 1000.0)]
        assert np.all(np.diff(vals) > 0)
        assert vals[-1] > 1e3 * max(abs(vals[0]), 1.0)
