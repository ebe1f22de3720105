import math

import numpy as np
import pytest

from jordangap.errors import DegenerateGapError, ParameterError, ResonanceError
from jordangap.schemas.models import ExplicitLadder, NormMode, PowerLadder
from jordangap.services import linop
from jordangap.services.acceptance import monotonicity_suite
from jordangap.services.spectra import EigenvalueLadder, make_ladder


def pair_ladder(a, b):
    return EigenvalueLadder(values=(a, b), generator=ExplicitLadder(values=(a, b)))


# ====== closed forms ======

def test_full_norm_at_one_four():
    res = linop.norm_L_full(1.0, 4.0)
    assert res.norm == pytest.approx((5.0 + 2.0 * math.sqrt(13.0)) / 9.0, rel=1e-14)
    assert res.norm == pytest.approx(1.356789, abs=1e-6)
    assert res.theta.theta == pytest.approx((10.0 - math.sqrt(13.0)) / 3.0, rel=1e-14)


def test_truncated_norm_at_one_four():
    res = linop.norm_L_truncated(1.0, 4.0)
    assert res.norm == pytest.approx(1.0, rel=1e-14)
    assert res.theta.theta == pytest.approx(2.0, rel=1e-14)


def test_truncated_never_exceeds_full():
    rng = np.random.default_rng(3)
    for _ in range(200):
        a, b = np.sort(np.exp(rng.uniform(-4.0, 9.0, 2)))
        assert linop.norm_L_truncated(a, b).norm <= linop.norm_L_full(a, b).norm * (1.0 + 1e-12)


def test_degenerate_gap():
    with pytest.raises(DegenerateGapError):
        linop.norm_L_full(4.0, 4.0)
    with pytest.raises(DegenerateGapError):
        linop.optimal_theta_truncated(4.0, 1.0)


def test_mu_min_rejects_nonpositive_lambda():
    with pytest.raises(ParameterError):
        linop.mu_min(0.0, 1.0)


def test_mu_min_matches_svd():
    lam, theta, w = 3.0, 5.5, 0.7
    A = np.array([[lam - theta + 1j * w, lam], [0.0, lam - theta + 1j * w]])
    smallest = np.linalg.svd(A, compute_uv=False)[-1] ** 2
    assert linop.mu_min(lam, theta, w) == pytest.approx(smallest, rel=1e-12)


def test_nu_root_solves_quadratic():
    lam, theta = 9.0, 12.0
    nu = linop.nu_root(lam, theta)
    assert nu * nu + lam * nu - (lam - theta) ** 2 == pytest.approx(0.0, abs=1e-12)
    assert nu == pytest.approx(math.sqrt(linop.mu_min(lam, theta)), rel=1e-12)


def test_minimax_balances_gap_eigenvalues():
    a, b = 9.0, 16.0
    theta = linop.optimal_theta_full(a, b).theta
    assert linop.block_inverse_norm(a, theta) == pytest.approx(linop.block_inverse_norm(b, theta), rel=1e-12)


@pytest.mark.parametrize("mode,tol", [(NormMode.FULL, 1e-8), (NormMode.TRUNCATED, 1e-10)])
def test_golden_section_matches_closed_form(mode, tol):
    for a, b in [(1.0, 4.0), (9.0, 16.0), (0.02, 7000.0), (100.0, 101.0)]:
        closed = linop.closed_form_norm(a, b, mode).theta.theta
        assert linop.minimax_theta(a, b, mode) == pytest.approx(closed, rel=tol)


# ====== oracle ======

def test_oracle_matches_closed_form_on_pair():
    ladder = pair_ladder(1.0, 4.0)
    closed = linop.norm_L_full(1.0, 4.0)
    oracle = linop.oracle_norm(ladder, closed.theta, linop.OmegaGrid(extent=40.0), NormMode.FULL, workers=1)
    assert abs(oracle.norm - closed.norm) / closed.norm < 1e-6
    assert oracle.attaining_omega == 0.0


def test_oracle_truncated_matches_closed_form():
    ladder = pair_ladder(2.0, 50.0)
    closed = linop.norm_L_truncated(2.0, 50.0)
    oracle = linop.oracle_norm(ladder, closed.theta, linop.OmegaGrid(extent=500.0), NormMode.TRUNCATED, workers=1)
    assert abs(oracle.norm - closed.norm) / closed.norm < 1e-9


def test_ladder_sup_sits_at_gap_eigenvalues():
    ladder = make_ladder(PowerLadder(), 200)
    n = 7
    a, b = ladder.pair(n)
    theta = linop.optimal_theta_full(a, b).theta
    oracle = linop.oracle_norm(ladder, theta, linop.OmegaGrid.for_ladder(ladder, points=101), NormMode.FULL, workers=2)
    assert oracle.attaining_mode in (n, n + 1)
    norms = linop.per_mode_norms(ladder, theta, NormMode.FULL)
    assert int(np.argmax(norms)) + 1 in (n, n + 1)


def test_oracle_resonance():
    ladder = make_ladder(PowerLadder(), 4)
    with pytest.raises(ResonanceError):
        linop.oracle_norm(ladder, 9.0, linop.OmegaGrid(extent=160.0, points=11), workers=1)


def test_omega_grid_contains_zero_and_refinement():
    grid = linop.OmegaGrid(extent=10.0, points=11).values()
    assert 0.0 in grid
    assert grid.min() == -10.0 and grid.max() == 10.0
    assert np.min(np.abs(grid[grid != 0.0])) < 1e-6


# ====== monotonicity ======

def test_monotonicity_signs_on_small_grid():
    checks = monotonicity_suite(size=12)
    assert checks.passed, [c.name for c in checks.failures]


def test_mu_min_increases_with_frequency():
    w = np.linspace(0.0, 50.0, 200)
    vals = linop.mu_min(4.0, 2.5, w)
    assert np.all(np.diff(vals) >= 0.0)


@pytest.mark.parametrize("mode", [NormMode.FULL, NormMode.TRUNCATED])
def test_closed_form_reports_attaining_mode(mode):
    ladder = make_ladder(PowerLadder(), 6)
    n = 3
    a, b = ladder.pair(n)
    closed = linop.closed_form_norm(a, b, mode, n)
    assert closed.attaining_mode == n
    assert closed.to_report()["attaining_mode"] == n
    oracle = linop.oracle_norm(ladder, closed.theta, linop.OmegaGrid.for_ladder(ladder, points=401), mode, workers=1)
    assert oracle.attaining_mode in (closed.attaining_mode, closed.attaining_mode + 1)
    assert linop.norm_L_full(1.0, 4.0).attaining_mode == 1
