import numpy as np
import pytest
from pydantic import ValidationError
from scipy.linalg import expm

from jordangap.commands.verify_all import perron_config
from jordangap.errors import ParameterError, ResonanceError, SupportError
from jordangap.schemas.config import ExperimentConfig, TrackingConfig
from jordangap.schemas.models import NonlinearityForm, PowerLadder, TrackingReport
from jordangap.services import acceptance, linop, perron
from jordangap.services.dynamics import JordanSystem, NonlinearitySpec, evolve, standard_pattern
from jordangap.services.spectra import make_ladder


def small_system(N=6, L=0.3, form=NonlinearityForm.GENERAL, seed=0, m=2):
    ladder = make_ladder(PowerLadder(), N)
    F = NonlinearitySpec.saturating(L, m, N, np.random.default_rng(seed), form=form)
    return JordanSystem(ladder=ladder, nonlinearity=F, pattern=standard_pattern(m))


def base_point(system, n, seed=1, scale=0.5):
    x = np.zeros((system.m, system.N))
    x[:, :n] = scale * np.random.default_rng(seed).standard_normal((system.m, n))
    return x


# ====== linear operators ======

def test_apply_L_solves_forced_problem():
    system = JordanSystem(ladder=make_ladder(PowerLadder(), 2), nonlinearity=NonlinearitySpec.zero())
    theta = 2.5
    times = np.linspace(-6.0, 0.0, 6001)
    h = np.cos(times)[:, None, None] * np.ones((1, 2, 2))
    h[:, 1, :] *= -0.5
    forcing = perron.WeightedTrajectory(times=times, weighted=np.exp(theta * times)[:, None, None] * h, theta=theta)
    xi = perron.apply_L(system, theta, forcing).states

    dt = times[1] - times[0]
    deriv = (xi[2:] - xi[:-2]) / (2.0 * dt)
    linear = np.einsum("ab,jbk->jak", system.pattern, xi[1:-1]) * system.lams
    residual = deriv + linear - h[1:-1]
    assert np.max(np.abs(residual)) < 1e-5
    # mode below theta ends at zero, mode above theta starts from zero
    np.testing.assert_allclose(xi[-1, :, 0], 0.0, atol=1e-14)
    np.testing.assert_allclose(xi[0, :, 1], 0.0, atol=1e-14)


def test_apply_T_is_homogeneous_backward_solution():
    system = small_system(N=4)
    n = 2
    theta = linop.optimal_theta_full(4.0, 9.0).theta
    times = np.linspace(-2.0, 0.0, 2001)
    data = base_point(system, n)
    xi = perron.apply_T(system, theta, data, times, n=n).states
    np.testing.assert_allclose(xi[-1], data, atol=1e-14)
    dt = times[1] - times[0]
    deriv = (xi[2:] - xi[:-2]) / (2.0 * dt)
    linear = np.einsum("ab,jbk->jak", system.pattern, xi[1:-1]) * system.lams
    assert np.max(np.abs(deriv + linear)) < 1e-4 * np.max(np.abs(xi))
    assert np.all(xi[:, :, n:] == 0.0)


def test_apply_T_rejects_high_mode_data():
    system = small_system(N=4)
    data = np.zeros((2, 4))
    data[0, 3] = 1.0
    with pytest.raises(SupportError):
        perron.apply_T(system, 6.0, data, np.linspace(-1.0, 0.0, 11), n=2)


def test_kernel_resonance():
    with pytest.raises(ResonanceError):
        perron.WeightedKernel(np.array([1.0, 4.0]), standard_pattern(2), 4.0, np.linspace(-1.0, 0.0, 11))


def test_default_horizon():
    assert perron.default_horizon(2.5, 1.0, 4.0) == pytest.approx(np.log(1e10) / 1.5)
    with pytest.raises(ResonanceError):
        perron.default_horizon(1.0, 1.0, 4.0)


def test_smoothstep_cutoff():
    t = np.linspace(-0.5, 1.5, 401)
    phi, dphi = perron.smoothstep(t)
    assert np.all(phi[t <= 0.0] == 0.0)
    assert np.all(phi[t >= 1.0] == 1.0)
    assert np.all(np.diff(phi) >= 0.0)
    assert np.all(dphi >= 0.0)
    inner = (t > 0.1) & (t < 0.9)
    numeric = np.gradient(phi, t)
    np.testing.assert_allclose(numeric[inner], dphi[inner], rtol=1e-3)


def test_weighted_trajectory_needs_increasing_grid():
    with pytest.raises(ParameterError):
        perron.WeightedTrajectory(times=np.array([0.0, 0.0, 1.0]), weighted=np.zeros((3, 2, 2)), theta=1.0)


def test_discrete_half_line_norm_below_full_line():
    system = JordanSystem(ladder=make_ladder(PowerLadder(), 4), nonlinearity=NonlinearitySpec.zero())
    closed = linop.norm_L_full(4.0, 9.0).norm
    half = perron.discrete_norm_L(system, 2, points=200, rng=np.random.default_rng(0))
    assert 0.5 * closed < half <= 1.05 * closed


# ====== fixed point ======

def test_zero_nonlinearity_gives_flat_manifold():
    system = JordanSystem(ladder=make_ladder(PowerLadder(), 5), nonlinearity=NonlinearitySpec.zero())
    graph = perron.ManifoldGraph(system, 2)
    value = perron.manifold_map(graph, base_point(system, 2))
    assert np.all(value == 0.0)


def test_solve_backward_contracts_at_predicted_rate():
    system = small_system()
    n = 2
    graph = perron.ManifoldGraph(system, n)
    data = base_point(system, n)
    result = graph.solve(data)
    assert result.contraction_rate <= system.nonlinearity.L * graph.operator_norm + 0.02
    assert result.residuals[-1] <= 1e-10
    # the solution passes through the base point
    final = result.trajectory.states[-1]
    np.testing.assert_allclose(final[:, :n], data[:, :n], atol=1e-12)


def test_manifold_graph_cache_hits():
    system = small_system()
    graph = perron.ManifoldGraph(system, 2)
    data = base_point(system, 2)
    first = perron.manifold_map(graph, data)
    second = perron.manifold_map(graph, data)
    np.testing.assert_array_equal(first, second)
    assert graph.cache.stats()["hits"] == 1
    assert np.all(first[:, :2] == 0.0)


def test_theta_rules():
    with pytest.raises(ParameterError):
        perron.ManifoldGraph(small_system(N=5, m=3), 2)
    with pytest.raises(ValidationError):
        perron.ManifoldGraph(small_system(N=5), 2, theta=10.0)
    graph = perron.ManifoldGraph(small_system(N=5, m=3), 2, theta=6.0)
    assert graph.base_dimension == 6
    lt = perron.ManifoldGraph(small_system(N=5, form=NonlinearityForm.LOWER_TRIANGULAR), 2)
    assert lt.theta.theta == pytest.approx(6.0)


def test_support_error_on_high_mode_base_point():
    system = small_system()
    graph = perron.ManifoldGraph(system, 2)
    data = base_point(system, 2)
    data[1, 4] = 0.1
    with pytest.raises(SupportError):
        perron.manifold_map(graph, data)


def test_lipschitz_sampling_below_contraction_bound():
    system = small_system()
    graph = perron.ManifoldGraph(system, 2)
    points = perron.random_base_points(graph, 6, np.random.default_rng(4), scale=0.5)
    ratio, pairs = perron.lipschitz_sampling(graph, points)
    assert pairs == 15
    assert ratio <= graph.lipschitz_bound + 0.05


def test_tighter_tolerance_converges_towards_reference():
    system = small_system()
    data = base_point(system, 2)
    values = {}
    for tol in (1e-3, 1e-6, 1e-12):
        graph = perron.ManifoldGraph(system, 2, settings=perron.PerronSettings(tol=tol))
        values[tol] = perron.manifold_map(graph, data)
    loose = np.linalg.norm(values[1e-3] - values[1e-12])
    tight = np.linalg.norm(values[1e-6] - values[1e-12])
    assert tight < loose


def test_invariance_defect_small():
    system = small_system()
    graph = perron.ManifoldGraph(system, 2)
    report = perron.verify_invariance(graph, base_point(system, 2), horizon=1.0, samples=3)
    assert len(report.defects) == 3
    assert report.max_defect < 1e-4


def test_lower_triangular_u_solve_matches_full_solve():
    system = small_system(L=0.5, form=NonlinearityForm.LOWER_TRIANGULAR)
    data = base_point(system, 2)
    full = perron.solve_backward(system, 2, data)
    reduced = perron.truncated_u_solve(system, 2, data)
    a = full.trajectory.states[:, 0, :]
    b = reduced.trajectory.states[:, 0, :]
    assert np.max(np.abs(a - b)) <= 1e-8 * max(1.0, np.max(np.abs(a)))


def test_truncated_u_solve_needs_lower_triangular():
    with pytest.raises(ParameterError):
        perron.truncated_u_solve(small_system(), 2, base_point(small_system(), 2))


def test_tracking_rate_at_least_theta():
    system = small_system()
    n = 2
    xi0 = np.random.default_rng(9).standard_normal((2, system.N))
    forward = evolve(system, xi0, (0.0, 3.0))
    trace, report = perron.tracking_trace(system, n, None, forward)
    assert trace.times[0] < 0.0 < trace.times[-1]
    assert not report.at_noise_floor
    assert report.fitted_rate >= 0.95 * report.theta
    assert report.constant > 0.0


def test_tracking_with_zero_nonlinearity():
    system = JordanSystem(ladder=make_ladder(PowerLadder(), 6), nonlinearity=NonlinearitySpec.zero())
    n = 2
    xi0 = np.random.default_rng(11).standard_normal((2, system.N))
    # v = 0 above the gap: the high modes decay as pure exponentials
    xi0[1, n:] = 0.0
    forward = evolve(system, xi0, (0.0, 3.0), dt=1e-3)
    trace, report = perron.tracking_trace(system, n, None, forward)
    # the linear system has the flat manifold Q_n xi = 0
    assert np.max(np.abs(trace.states[:, :, n:])) < 1e-4 * np.max(np.abs(xi0))
    assert not report.at_noise_floor
    assert report.fitted_rate >= 0.999 * system.ladder.values[n]


def test_tracking_trace_keeps_constant_forcing():
    ladder = make_ladder(PowerLadder(), 4)
    system = JordanSystem(ladder=ladder, nonlinearity=NonlinearitySpec.constant(2.0, 4, 4))
    graph = perron.ManifoldGraph(system, 2)
    M0 = perron.manifold_map(graph, np.zeros((2, 4)))
    # the equilibrium (16 J)^{-1} (0, 2) on mode 4
    np.testing.assert_allclose(M0[:, 3], [-0.125, 0.125], atol=1e-5)
    np.testing.assert_allclose(M0[:, :3], 0.0, atol=1e-14)

    forward = evolve(system, M0, (0.0, 3.0), dt=1e-3)
    np.testing.assert_allclose(forward.final().components, M0, atol=1e-5)
    trace, _ = perron.tracking_trace(system, 2, None, forward)
    np.testing.assert_allclose(trace.states[trace.index_of(0.0)], M0, atol=1e-5)
    keep = trace.times >= -1.0
    np.testing.assert_allclose(trace.states[keep], np.broadcast_to(M0, trace.states[keep].shape), atol=1e-5)


def test_tracking_check_fails_at_noise_floor(monkeypatch):
    config = ExperimentConfig(N=6, n=2, tracking=TrackingConfig(t_plus=2.0))

    def flat_trace(system, n, theta, xi, settings=None):
        report = TrackingReport(theta=theta, fitted_rate=float("inf"), constant=0.0, fit_window=(1.0, 1.5),
                                at_noise_floor=True)
        return None, report

    monkeypatch.setattr(perron, "tracking_trace", flat_trace)
    checks, _ = acceptance.perron_suite(config, np.random.default_rng(0), NonlinearityForm.GENERAL, 0.3,
                                        stages=("tracking",))
    assert [c.name for c in checks.failures] == ["perron.tracking_rate"]


def test_zero_nonlinearity_returns_homogeneous_solution():
    system = JordanSystem(ladder=make_ladder(PowerLadder(), 5), nonlinearity=NonlinearitySpec.zero())
    data = base_point(system, 2)
    result = perron.solve_backward(system, 2, data)
    assert result.iterations == 1
    expected = perron.apply_T(system, result.trajectory.theta, data, result.trajectory.times, n=2)
    np.testing.assert_array_equal(result.trajectory.weighted, expected.weighted)


def test_solve_backward_matches_dense_linear_solve():
    rng = np.random.default_rng(12)
    B = rng.standard_normal((6, 6))
    B *= 0.2 / np.linalg.norm(B, 2)
    system = JordanSystem(ladder=make_ladder(PowerLadder(), 3), nonlinearity=NonlinearitySpec.linear(B, 2, 3))
    data = base_point(system, 1)
    result = perron.solve_backward(system, 1, data, settings=perron.PerronSettings(T=2.0, dt=0.02, tol=1e-13))

    times = result.trajectory.times
    kernel = perron.WeightedKernel(system.lams, system.pattern, result.trajectory.theta, times)
    size = times.size * 6
    solution_matrix = kernel.apply(np.eye(size).reshape(size, times.size, 2, 3)).reshape(size, size).T
    coupling = np.kron(np.eye(times.size), B)
    z_hom = kernel.homogeneous(data).reshape(-1)
    dense = np.linalg.solve(np.eye(size) - solution_matrix @ coupling, z_hom)
    np.testing.assert_allclose(result.trajectory.weighted.reshape(-1), dense, rtol=0.0,
                               atol=1e-9 * np.max(np.abs(dense)))


def test_apply_L_constant_forcing_steady_state():
    system = JordanSystem(ladder=make_ladder(PowerLadder(), 2), nonlinearity=NonlinearitySpec.zero())
    theta = 2.5
    times = np.linspace(-12.0, 0.0, 24001)
    h_vec = np.array([1.0, 2.0])
    h = np.broadcast_to(h_vec[None, :, None], (times.size, 2, 2))
    forcing = perron.WeightedTrajectory(times=times, weighted=np.exp(theta * times)[:, None, None] * h, theta=theta)
    xi = perron.apply_L(system, theta, forcing).states

    # mode above theta: relaxed to (lambda J)^{-1} h long after the zero start
    steady_high = np.linalg.solve(4.0 * system.pattern, h_vec)
    np.testing.assert_allclose(xi[-1, :, 1], steady_high, rtol=1e-6)
    # mode below theta: (I - exp(-t lambda J)) (lambda J)^{-1} h, zero at t = 0
    steady_low = np.linalg.solve(system.pattern, h_vec)
    j = int(np.argmin(np.abs(times + 1.0)))
    expected = (np.eye(2) - expm(-times[j] * system.pattern)) @ steady_low
    np.testing.assert_allclose(xi[j, :, 0], expected, rtol=1e-5)


@pytest.mark.slow
@pytest.mark.parametrize("form, L, theta", [
    (NonlinearityForm.GENERAL, 0.5, None),
    (NonlinearityForm.LOWER_TRIANGULAR, 0.9, 12.0),
])
def test_perron_acceptance_instances(form, L, theta):
    config = perron_config(ExperimentConfig())
    checks, results = acceptance.perron_suite(config, np.random.default_rng(0), form, L, theta=theta)
    assert checks.passed, [(c.name, c.value, c.detail) for c in checks.failures]
    assert L * results["operator_norm"] < 1.0
    assert results["base_dimension"] == 6
