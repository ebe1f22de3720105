import math

import numpy as np
import pytest

from jordangap.errors import ParameterError, ShapeError, SizeError
from jordangap.schemas.config import ExperimentConfig, KwakConfig
from jordangap.schemas.models import PowerLadder
from jordangap.services import kwak
from jordangap.services.acceptance import hl_norm_suite, kwak_suite
from jordangap.services.dynamics import StateVector
from jordangap.services.spectra import make_ladder


# ====== Fourier fields ======

def test_sine_on_grid():
    u = kwak.FourierField.sine(8, k=2, amplitude=1.5)
    np.testing.assert_allclose(u.to_physical(), 1.5 * np.sin(2.0 * u.grid()), atol=1e-13)


def test_derivative_and_antiderivative():
    s = kwak.FourierField.sine(8)
    c = kwak.FourierField.cosine(8)
    np.testing.assert_allclose(s.derivative().coefficients, c.coefficients, atol=1e-15)
    np.testing.assert_allclose(c.antiderivative().coefficients, s.coefficients, atol=1e-15)


def test_field_validation():
    with pytest.raises(ShapeError):
        kwak.FourierField(np.zeros(4))
    c = np.zeros(5, dtype=complex)
    c[3] = 1.0j
    with pytest.raises(ParameterError):
        kwak.FourierField(c)
    assert not kwak.FourierField(c, real=False).real


def test_dealiased_product_of_sines():
    s = kwak.FourierField.sine(8)
    sq = kwak.pseudo_product(s, s)
    expected = np.zeros(17, dtype=complex)
    expected[8] = 0.5
    expected[6] = expected[10] = -0.25
    np.testing.assert_allclose(sq.coefficients, expected, atol=1e-14)
    u = kwak.FourierField.random_smooth(8, np.random.default_rng(0))
    assert kwak.dealias_product_check(u, u) < 1e-12


def test_resized_keeps_low_modes():
    u = kwak.FourierField.random_smooth(8, np.random.default_rng(1))
    big = u.resized(16)
    assert big.N_f == 16
    np.testing.assert_array_equal(big.resized(8).coefficients, u.coefficients)


# ====== expressions ======

def test_expression_parsing():
    f = kwak.NonlinearityExpression("-u**3 + 0.1*u*ux")
    assert f.degree == 3
    assert f.uses_ux
    assert kwak.NonlinearityExpression(None).is_zero
    with pytest.raises(ParameterError):
        kwak.NonlinearityExpression("sin(u)")
    with pytest.raises(ParameterError):
        kwak.NonlinearityExpression("u*z")


def test_transformed_nonlinearity_for_identity():
    # f = u gives G = u, so F(sin x) = (d_xx - 1)^{-1} sin x = -sin x / 2
    u = kwak.FourierField.sine(8)
    F = kwak.rda_nonlinearity_F(u, "u")
    np.testing.assert_allclose(F.coefficients, u.scaled(-0.5).coefficients, atol=1e-14)


# ====== transforms ======

def test_burgers_transform_consistent():
    u = kwak.FourierField.random_smooth(8, np.random.default_rng(2), amplitude=0.5)
    state = kwak.burgers_kwak_transform(u, 0.5)
    assert state.consistency_error() < 1e-13
    assert state.to_array().shape == (3, 17)
    with pytest.raises(ParameterError):
        kwak.burgers_kwak_transform(u, 0.0)


def test_rda_transform_consistent():
    u = kwak.FourierField.random_smooth(8, np.random.default_rng(3), amplitude=0.5)
    state = kwak.rda_kwak_transform(u, "-u**3 + 0.1*u*ux")
    assert state.consistency_error() < 1e-13
    assert kwak.iterated_rda_transform(u, "-u**3").shape == (3, 17)


def test_field_size_and_reaction_checks():
    small = kwak.FourierField.sine(4)
    with pytest.raises(SizeError):
        kwak.rda_evolve(small, "0")
    u = kwak.FourierField.sine(8)
    with pytest.raises(ParameterError):
        kwak.burgers_evolve(u, 1.0, "u*ux")
    with pytest.raises(ParameterError):
        kwak.burgers_evolve(u, -1.0)


def test_linear_rda_decays_exactly():
    u = kwak.FourierField.sine(8, k=3)
    traj = kwak.rda_evolve(u, "0", (0.0, 0.5), dt=0.01)
    np.testing.assert_allclose(traj.states[-1, 0], u.coefficients * math.exp(-10.0 * 0.5), atol=1e-15)


def test_chain_rule_residual_shrinks_with_step():
    u0 = kwak.FourierField.random_smooth(8, np.random.default_rng(4), amplitude=0.5)
    f = "-u**3 + 0.1*u*ux"
    coarse = kwak.chain_rule_residual(kwak.rda_evolve(u0, f, (0.0, 0.2), dt=2e-3), f)
    fine = kwak.chain_rule_residual(kwak.rda_evolve(u0, f, (0.0, 0.2), dt=1e-3), f)
    assert fine < coarse
    report = kwak.iterated_chain_residual(kwak.rda_evolve(u0, f, (0.0, 0.2), dt=1e-3), f)
    assert len(report["phi_norms"]) == 10
    assert report["pattern"][0] == [1.0, 1.0, 0.0]


def test_burgers_diagram_improves_under_refinement():
    u0 = kwak.FourierField.random_smooth(8, np.random.default_rng(5), amplitude=0.5)
    res = kwak.commuting_diagram_burgers(u0, nu=1.0, T=0.1, dt=2e-3)
    assert res.error < 1e-2
    assert res.refined_error < res.error


# ====== re-embedding ======

def test_reembedding_inverse():
    ladder = make_ladder(PowerLadder(), 5)
    x = StateVector(np.random.default_rng(6).standard_normal((2, 5)))
    y = kwak.self_adjoint_reembedding(x, ladder)
    back = kwak.self_adjoint_reembedding(y, ladder, inverse=True)
    np.testing.assert_allclose(back.components, x.components, rtol=1e-14)
    np.testing.assert_array_equal(y.components[1], x.components[1])
    with pytest.raises(ShapeError):
        kwak.self_adjoint_reembedding(np.zeros((3, 5)), ladder)


@pytest.mark.parametrize("profile", sorted(kwak.SYNTHETIC_PROFILES))
def test_hl_lipschitz_ratio_bounded(profile):
    rng = np.random.default_rng(7)
    ladder = make_ladder(PowerLadder(), 12)
    F = kwak.synthetic_nonlinearity(profile, 0.5, 12, rng)
    assert kwak.hl_lipschitz_ratio(F, 0.5, ladder, 200, rng) <= math.sqrt(0.5) * (1.0 + 1e-6)


def test_unknown_profile():
    with pytest.raises(ParameterError):
        kwak.synthetic_nonlinearity("relu6", 0.5, 4, np.random.default_rng(0))


def test_hl_norm_suite():
    checks = hl_norm_suite(np.random.default_rng(8), 100, N=8)
    assert checks.passed


@pytest.mark.slow
def test_kwak_acceptance_suite():
    config = ExperimentConfig(kwak=KwakConfig(N_f=16))
    checks, results = kwak_suite(config, np.random.default_rng(0))
    assert checks.passed, [(c.name, c.value) for c in checks.failures]
    assert results["burgers"]["refinement_ratio"] >= 3.0


def test_field_from_grid_values_and_arithmetic():
    s = kwak.FourierField.sine(8, k=3)
    back = kwak.FourierField.from_physical(np.sin(3.0 * s.grid()), 8)
    np.testing.assert_allclose(back.coefficients, s.coefficients, atol=1e-13)
    np.testing.assert_allclose((s - back).coefficients, kwak.FourierField.zeros(8).coefficients, atol=1e-13)
    np.testing.assert_allclose((s + back).to_physical(), 2.0 * np.sin(3.0 * s.grid()), atol=1e-12)
