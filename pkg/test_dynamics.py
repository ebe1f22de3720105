import numpy as np
import pytest
from scipy.integrate import trapezoid
from scipy.linalg import expm

from jordangap.errors import DivergenceError, ParameterError, ShapeError
from jordangap.schemas.models import NonlinearityForm, PowerLadder
from jordangap.services.acceptance import propagator_exactness
from jordangap.services.dynamics import (
    BURGERS_PATTERN,
    JORDAN_2,
    JordanSystem,
    NonlinearitySpec,
    StateVector,
    block_propagator,
    empirical_lipschitz,
    evolve,
    exponential_integrate,
    jordan_moments,
    propagator_bound,
    second_order_residual,
    standard_pattern,
    uniform_grid,
    v_equation_residual,
    validate_pattern,
)
from jordangap.services.spectra import make_ladder


def test_block_propagator_closed_form():
    lam, t = 3.0, 0.4
    P = block_propagator(lam, t)
    expected = np.exp(-lam * t) * np.array([[1.0, -lam * t], [0.0, 1.0]])
    np.testing.assert_allclose(P, expected, rtol=1e-14, atol=1e-16)


def test_propagator_matches_expm_and_group_law():
    checks = propagator_exactness(np.random.default_rng(5), 200)
    assert checks.passed, [(c.name, c.value) for c in checks.failures]


def test_moments_match_quadrature():
    pat = standard_pattern(3)
    sigma, rho, h = 2.5, 1.5, 0.3
    E, I0, I1 = jordan_moments(sigma, rho, h, pat)
    B = sigma * np.eye(3) + rho * (pat - np.eye(3))
    taus = np.linspace(0.0, h, 4001)
    mats = np.array([expm(-tau * B) for tau in taus])
    np.testing.assert_allclose(E, expm(-h * B), rtol=1e-13, atol=1e-15)
    np.testing.assert_allclose(I0, trapezoid(mats, taus, axis=0), rtol=1e-6, atol=1e-12)
    np.testing.assert_allclose(I1, trapezoid(taus[:, None, None] * mats, taus, axis=0), rtol=1e-6, atol=1e-12)


def test_moments_negative_step_and_small_argument():
    E, I0, _ = jordan_moments(1e-6, 1e-6, -0.5, JORDAN_2)
    B = 1e-6 * JORDAN_2
    np.testing.assert_allclose(E, expm(0.5 * B), rtol=1e-14)
    np.testing.assert_allclose(I0, -0.5 * np.eye(2), rtol=1e-5, atol=1e-6)


def test_pattern_validation():
    validate_pattern(BURGERS_PATTERN)
    with pytest.raises(ParameterError):
        validate_pattern([[1.0, 0.0], [1.0, 1.0]])
    with pytest.raises(ShapeError):
        validate_pattern([[1.0, 1.0]])


def test_propagator_bound_jordan_growth():
    ladder = make_ladder(PowerLadder(), 8)
    # ||e^{-tJ}|| exceeds e^{-t} by the polynomial factor from the nilpotent part
    assert propagator_bound(ladder, 0.5) > np.exp(-0.5)
    assert propagator_bound(ladder, 0.5) <= 1.0


def test_state_vector_shapes():
    sv = StateVector.from_components([1.0, 2.0], [3.0, 4.0])
    assert sv.m == 2 and sv.N == 2
    assert sv.norm() == pytest.approx(np.sqrt(30.0))
    with pytest.raises(ShapeError):
        StateVector.from_components([1.0], [1.0, 2.0])


def test_saturating_lipschitz_bound():
    rng = np.random.default_rng(1)
    for form in NonlinearityForm:
        F = NonlinearitySpec.saturating(0.5, 2, 6, rng, form=form)
        assert empirical_lipschitz(F, 2, 6, rng) <= 0.5 * (1.0 + 1e-8)
        x = rng.standard_normal((2, 6))
        d = 1e-3 * rng.standard_normal((2, 6))
        np.testing.assert_allclose(F.difference(x, d), F(x + d) - F(x), atol=1e-14)


def test_lower_triangular_only_feeds_last_component():
    rng = np.random.default_rng(2)
    F = NonlinearitySpec.saturating(0.9, 2, 4, rng, form=NonlinearityForm.LOWER_TRIANGULAR)
    out = F(rng.standard_normal((2, 4)))
    assert np.all(out[0] == 0.0)
    x = rng.standard_normal((2, 4))
    y = x.copy()
    y[1] += 5.0
    np.testing.assert_array_equal(F(x), F(y))


def test_linear_flow_is_exact():
    ladder = make_ladder(PowerLadder(), 4)
    system = JordanSystem(ladder=ladder, nonlinearity=NonlinearitySpec.zero())
    xi0 = np.array([[1.0, -1.0, 0.5, 2.0], [0.3, 0.2, -0.1, 1.0]])
    traj = evolve(system, xi0, (0.0, 0.2), dt=0.05)
    expected = np.stack([block_propagator(l, 0.2) @ xi0[:, k] for k, l in enumerate(ladder.values)], axis=1)
    np.testing.assert_allclose(traj.final().components, expected, rtol=1e-13, atol=1e-15)


def test_midpoint_is_second_order():
    ladder = make_ladder(PowerLadder(), 3)
    F = NonlinearitySpec.saturating(1.0, 2, 3, np.random.default_rng(4))
    system = JordanSystem(ladder=ladder, nonlinearity=F)
    xi0 = np.ones((2, 3))
    ref = evolve(system, xi0, (0.0, 1.0), dt=1e-4).final().components
    e1 = np.linalg.norm(evolve(system, xi0, (0.0, 1.0), dt=0.02).final().components - ref)
    e2 = np.linalg.norm(evolve(system, xi0, (0.0, 1.0), dt=0.01).final().components - ref)
    assert 2.5 < e1 / e2 < 5.5


def test_euler_is_first_order():
    lams = np.array([1.0, 4.0])
    rhs = lambda t, x: np.sin(x)
    xi0 = np.ones((2, 2))
    ref = exponential_integrate(lams, JORDAN_2, rhs, xi0, uniform_grid((0.0, 1.0), 1e-4), "midpoint").states[-1]
    e1 = np.linalg.norm(exponential_integrate(lams, JORDAN_2, rhs, xi0, uniform_grid((0.0, 1.0), 0.02), "euler").states[-1] - ref)
    e2 = np.linalg.norm(exponential_integrate(lams, JORDAN_2, rhs, xi0, uniform_grid((0.0, 1.0), 0.01), "euler").states[-1] - ref)
    assert 1.6 < e1 / e2 < 2.4


def test_divergence_detected():
    with pytest.raises(DivergenceError) as info:
        exponential_integrate(np.array([1.0]), [[1.0]], lambda t, x: x ** 3, np.array([[10.0]]),
                              uniform_grid((0.0, 1.0), 0.1), "euler")
    assert info.value.step >= 1


def test_unknown_scheme():
    with pytest.raises(ParameterError):
        exponential_integrate(np.array([1.0]), [[1.0]], lambda t, x: x, np.array([[1.0]]),
                              uniform_grid((0.0, 1.0), 0.5), "rk4")


def test_second_order_form_of_two_jordan_system():
    ladder = make_ladder(PowerLadder(), 4)
    F = NonlinearitySpec.saturating(0.9, 2, 4, np.random.default_rng(7), form=NonlinearityForm.LOWER_TRIANGULAR)
    system = JordanSystem(ladder=ladder, nonlinearity=F)
    xi0 = 0.5 * np.ones((2, 4))
    coarse = evolve(system, xi0, (0.0, 0.5), dt=2e-3)
    fine = evolve(system, xi0, (0.0, 0.5), dt=1e-3)
    r_coarse = second_order_residual(system, coarse)
    r_fine = second_order_residual(system, fine)
    assert r_fine < r_coarse
    assert r_fine < 1e-2
    assert v_equation_residual(system, fine) < 1e-2


def test_uniform_grid_covers_span():
    grid = uniform_grid((0.0, 1.0), 0.3)
    assert grid[0] == 0.0 and grid[-1] == 1.0
    assert np.all(np.diff(grid) <= 0.3 + 1e-15)
    with pytest.raises(ParameterError):
        uniform_grid((1.0, 0.0), 0.1)


def test_state_vector_arithmetic_and_components():
    a = StateVector.from_components([1.0, 2.0], [3.0, 4.0])
    b = StateVector.from_components([0.5, 0.5], [1.0, -1.0])
    np.testing.assert_allclose((a + b).u, [1.5, 2.5])
    np.testing.assert_allclose((a - b).v, [2.0, 5.0])


def test_linear_nonlinearity_uses_operator_norm():
    rng = np.random.default_rng(3)
    B = rng.standard_normal((8, 8))
    F = NonlinearitySpec.linear(B, 2, 4)
    assert F.L == pytest.approx(np.linalg.norm(B, 2))
    x = rng.standard_normal((2, 4))
    np.testing.assert_allclose(F(x).reshape(-1), B @ x.reshape(-1), atol=1e-13)
    with pytest.raises(ShapeError):
        NonlinearitySpec.linear(np.eye(3), 2, 4)


def test_constant_forcing_reaches_equilibrium():
    ladder = make_ladder(PowerLadder(), 3)
    F = NonlinearitySpec.constant(2.0, 1, 3)
    out = F(np.zeros((2, 3)))
    np.testing.assert_array_equal(out, [[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]])
    system = JordanSystem(ladder=ladder, nonlinearity=F)
    traj = evolve(system, np.zeros((2, 3)), (0.0, 40.0), dt=0.05)
    final = traj.final()
    # steady state of u' = -u - v, v' = -v + c
    assert final.v[0] == pytest.approx(2.0, rel=1e-8)
    assert final.u[0] == pytest.approx(-2.0, rel=1e-8)


@pytest.mark.parametrize("form", list(NonlinearityForm))
def test_calibrated_nonlinearity_hits_sampled_lipschitz(form):
    F = NonlinearitySpec.calibrated(0.5, 2, 6, np.random.default_rng(7), form=form, scale=0.5)
    assert F.L == 0.5
    assert F.name == "calibrated"
    # replay the calibration draws: W first, then the sample pairs
    rng = np.random.default_rng(7)
    size = 12 if form == NonlinearityForm.GENERAL else 6
    rng.standard_normal((size, size))
    assert empirical_lipschitz(F, 2, 6, rng, scale=0.5) == pytest.approx(0.5, rel=1e-10)
    # a fresh sample stays near the target
    fresh = empirical_lipschitz(F, 2, 6, np.random.default_rng(8), samples=400, scale=0.5)
    assert 0.25 < fresh < 1.0
