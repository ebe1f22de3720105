import numpy as np
import pytest
from pydantic import ValidationError

from jordangap.errors import ParameterError, ShapeError, SizeError
from jordangap.schemas.models import ExplicitLadder, PeriodicLadder, PowerLadder
from jordangap.services.spectra import (
    EigenvalueLadder,
    SpectralProjector,
    dimension_of_base,
    fourier_eigenvalues,
    ladder_gaps,
    make_ladder,
    power_law_gap_growth,
    project,
)


def test_power_ladder_values():
    ladder = make_ladder(PowerLadder(c=1.0, p=2.0), 5)
    assert ladder.values == (1.0, 4.0, 9.0, 16.0, 25.0)
    assert ladder.pair(3) == (9.0, 16.0)
    assert len(ladder) == 5


def test_periodic_ladder_repeats_each_value():
    ladder = make_ladder(PeriodicLadder(nu=1.0, shift=1.0), 6)
    assert ladder.values == (2.0, 2.0, 5.0, 5.0, 10.0, 10.0)
    assert np.all(ladder_gaps(ladder) >= 0.0)


def test_periodic_ladder_with_zero_mode():
    ladder = make_ladder(PeriodicLadder(nu=2.0, shift=1.0, include_zero=True), 4)
    assert ladder.values == (1.0, 3.0, 3.0, 9.0)


def test_explicit_ladder_defaults_to_its_length():
    ladder = make_ladder(ExplicitLadder(values=(1.0, 4.0)))
    assert ladder.N == 2


def test_explicit_ladder_too_short():
    with pytest.raises(SizeError):
        make_ladder(ExplicitLadder(values=(1.0, 4.0)), 3)


def test_explicit_ladder_must_be_sorted_and_positive():
    with pytest.raises(ParameterError):
        make_ladder(ExplicitLadder(values=(4.0, 1.0)))
    with pytest.raises(ParameterError):
        make_ladder(ExplicitLadder(values=(0.0, 1.0)))


def test_empty_ladder_rejected():
    with pytest.raises(SizeError):
        make_ladder(ExplicitLadder(values=()))


def test_ladder_must_match_generator():
    with pytest.raises(ValidationError):
        EigenvalueLadder(values=(1.0, 4.0, 10.0), generator=PowerLadder())


def test_fourier_eigenvalues_symmetric():
    lam = fourier_eigenvalues(3, nu=0.5, shift=1.0)
    assert lam.shape == (7,)
    assert lam[3] == 1.0
    np.testing.assert_allclose(lam, lam[::-1])
    assert lam[-1] == pytest.approx(0.5 * 9 + 1.0)


def test_projectors_split_modes():
    proj = SpectralProjector(n=2, total=5)
    x = np.arange(10.0).reshape(2, 5)
    low = project(x, proj, "low")
    high = project(x, proj, "high")
    np.testing.assert_array_equal(low + high, x)
    assert np.all(low[:, 2:] == 0.0)
    assert np.all(high[:, :2] == 0.0)
    assert dimension_of_base(2, 2) == 4


def test_project_checks_shape():
    with pytest.raises(ShapeError):
        project(np.zeros(4), SpectralProjector(n=2, total=5), "low")


def test_projector_index_range():
    with pytest.raises(ParameterError):
        SpectralProjector(n=6, total=5)


def test_power_law_gaps_grow():
    assert power_law_gap_growth(make_ladder(PowerLadder(p=2.0), 20))
    assert not power_law_gap_growth(make_ladder(PowerLadder(p=0.5), 20))
