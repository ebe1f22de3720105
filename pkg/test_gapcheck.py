import math

import numpy as np
import pytest
from pydantic import ValidationError

from jordangap.errors import GapIndexError, ParameterError
from jordangap.schemas.models import ExplicitLadder, GapConditionKind, GapKind, PowerLadder
from jordangap.services import gapcheck, linop
from jordangap.services.acceptance import denominator_bounds
from jordangap.services.spectra import make_ladder

ONE_FOUR = make_ladder(ExplicitLadder(values=(1.0, 4.0)))


def test_jordan_full_lhs_at_one_four():
    lhs = gapcheck.gap_lhs(ONE_FOUR, 1, "jordan_full")
    assert lhs == pytest.approx(9.0 / (5.0 + 2.0 * math.sqrt(13.0)), rel=1e-14)
    assert lhs == pytest.approx(0.737, abs=1e-3)


def test_jordan_full_lhs_is_inverse_norm():
    for a, b in [(1.0, 4.0), (9.0, 16.0), (3.0, 1000.0)]:
        ladder = make_ladder(ExplicitLadder(values=(a, b)))
        assert gapcheck.gap_lhs(ladder, 1, "jordan_full") == pytest.approx(1.0 / linop.norm_L_full(a, b).norm, rel=1e-13)


def test_report_satisfied_at_half():
    report = gapcheck.gap_report(ONE_FOUR, 1, 0.5, "jordan_full")
    assert report.satisfied
    assert report.theta_star == pytest.approx(linop.optimal_theta_full(1.0, 4.0).theta)


def test_other_kinds_at_one_four():
    assert gapcheck.gap_lhs(ONE_FOUR, 1, "self_adjoint_zero") == pytest.approx(1.5)
    assert gapcheck.gap_lhs(ONE_FOUR, 1, "self_adjoint_half") == pytest.approx(1.0)
    assert gapcheck.gap_lhs(ONE_FOUR, 1, "jordan_truncated") == pytest.approx(1.0)
    assert gapcheck.gap_lhs(ONE_FOUR, 1, "jordan_sufficient") == pytest.approx(1.0 / 3.0)


def test_general_kind_reduces_to_special_cases():
    ladder = make_ladder(PowerLadder(), 10)
    for n in range(1, 10):
        zero = gapcheck.gap_lhs(ladder, n, "self_adjoint_general", beta=0.0)
        assert zero == pytest.approx(gapcheck.gap_lhs(ladder, n, "self_adjoint_zero"))
        half = gapcheck.gap_lhs(ladder, n, "self_adjoint_general", beta=-1.0)
        assert half == pytest.approx(gapcheck.gap_lhs(ladder, n, "self_adjoint_half"))


def test_beta_range():
    with pytest.raises(ValidationError):
        GapConditionKind(kind=GapKind.SELF_ADJOINT_GENERAL, beta=-2.0)
    with pytest.raises(ValidationError):
        GapConditionKind(kind=GapKind.SELF_ADJOINT_GENERAL)
    with pytest.raises(ValidationError):
        GapConditionKind(kind=GapKind.JORDAN_FULL, beta=-0.5)


def test_sufficient_condition_implies_full():
    ladder = make_ladder(PowerLadder(p=1.5), 40)
    for n in range(1, 40):
        assert gapcheck.gap_lhs(ladder, n, "jordan_sufficient") < gapcheck.gap_lhs(ladder, n, "jordan_full")
        assert gapcheck.gap_lhs(ladder, n, "jordan_full") < gapcheck.gap_lhs(ladder, n, "jordan_truncated")


def test_equal_eigenvalues_give_zero():
    ladder = make_ladder(ExplicitLadder(values=(1.0, 2.0, 2.0, 5.0)))
    assert gapcheck.gap_lhs(ladder, 2, "jordan_full") == 0.0
    assert gapcheck.gap_report(ladder, 2, 0.1, "jordan_full").theta_star is None


def test_gap_index_range():
    with pytest.raises(GapIndexError):
        gapcheck.gap_lhs(ONE_FOUR, 2, "jordan_full")
    with pytest.raises(GapIndexError):
        gapcheck.gap_lhs(ONE_FOUR, 0, "jordan_full")


def test_find_admissible_n_power_ladder():
    ladder = make_ladder(PowerLadder(), 16)
    found = gapcheck.find_admissible_n(ladder, 0.5, "jordan_full")
    assert found == sorted(found)
    assert 3 in found
    # for k^2 the Jordan gap increases from 0.737 towards 1, so every index clears 0.5
    assert found == list(range(1, 16))


def test_find_admissible_n_shrinks_as_L_grows():
    ladder = make_ladder(PowerLadder(), 30)
    previous = None
    for L in [0.5, 1.0, 2.0, 4.0, 8.0]:
        found = set(gapcheck.find_admissible_n(ladder, L, "jordan_full"))
        if previous is not None:
            assert found <= previous
        previous = found


def test_find_admissible_n_needs_positive_L():
    with pytest.raises(ParameterError):
        gapcheck.find_admissible_n(ONE_FOUR, 0.0, "jordan_full")


def test_gap_reports_table():
    kinds = [GapConditionKind(kind=GapKind.JORDAN_FULL), GapConditionKind(kind=GapKind.SELF_ADJOINT_HALF)]
    rows = gapcheck.gap_reports(make_ladder(PowerLadder(), 5), 0.5, kinds)
    assert len(rows) == 8
    assert {r.kind.kind for r in rows} == {GapKind.JORDAN_FULL, GapKind.SELF_ADJOINT_HALF}


def test_equivalence_bounds_strict():
    rng = np.random.default_rng(11)
    checks = denominator_bounds(rng, 300)
    assert checks.passed, [c.detail for c in checks.failures]


def test_equivalence_bounds_values():
    lo, hi = gapcheck.gap_equivalence_bounds(1.0, 4.0)
    assert lo == pytest.approx(9.0)
    assert hi == pytest.approx(27.0)
    assert lo < linop.gap_denominator(1.0, 4.0) < hi
