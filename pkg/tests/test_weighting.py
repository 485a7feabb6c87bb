import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wrse.weighting import DecayWeighting, DomainError, even_horizons, inverse_weight, weight, weighted_horizons


def test_weight_examples():
    assert weight(0.5, 1) == 0.5
    assert weight(0.7, 0) == 1.0
    assert weight(0.3, 2) == pytest.approx(0.09, rel=1e-15)
    with pytest.raises(DomainError):
        weight(0.5, -1)
    with pytest.raises(DomainError):
        weight(1.0, 1)


def test_inverse_examples():
    assert inverse_weight(0.5, 0.5) == 1.0
    assert inverse_weight(0.5, 1 / 16) == 4.0
    assert inverse_weight(0.3, 1) == 0.0
    for p in (0.0, -0.1, 1.5):
        with pytest.raises(DomainError):
            inverse_weight(0.5, p)


@settings(max_examples=300)
@given(st.floats(1e-3, 1 - 1e-3), st.floats(1e-6, 1.0))
def test_round_trip(gamma, p):
    assert weight(gamma, inverse_weight(gamma, p)) == pytest.approx(p, rel=1e-12)


def test_weighted_grid_examples():
    h = weighted_horizons(0.5, 15).horizons_hours
    assert h[7] == 24.0 and h[14] == 96.0
    mpmath.mp.dps = 40
    ref = 24 * mpmath.log(mpmath.mpf(15) / 16) / mpmath.log(mpmath.mpf("0.5"))
    assert h[0] == pytest.approx(float(ref), rel=1e-14)
    assert h[0] == pytest.approx(2.2346, abs=1e-4)
    assert int(np.sum(h <= 24.0)) == 8


@settings(max_examples=100)
@given(st.floats(0.01, 0.99), st.integers(1, 60))
def test_weighted_grid_strictly_increasing(gamma, K):
    h = weighted_horizons(gamma, K).horizons_hours
    assert h.size == K and np.all(np.diff(h) > 0) and h[0] > 0


def test_even_grid():
    np.testing.assert_array_equal(even_horizons(5, 10).horizons_hours, [48, 96, 144, 192, 240])
    np.testing.assert_array_equal(even_horizons(1, 10).horizons_hours, [240])
    np.testing.assert_array_equal(even_horizons(10).horizons_hours, np.arange(24, 241, 24))
    with pytest.raises(DomainError):
        even_horizons(0)
    with pytest.raises(DomainError):
        even_horizons(3, 0)


def test_decay_object():
    w = DecayWeighting(0.5)
    assert w(2) == 0.25
    assert w.of_hours(48) == 0.25
    assert w.inverse(0.25) == pytest.approx(2.0)
    with pytest.raises(DomainError):
        DecayWeighting(0.0)
    assert weighted_horizons(0.5, 3).label().startswith("weighted")
    assert math.isclose(float(weighted_horizons(0.5, 3).parameter), 0.5)
