import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from invariant_kahler.special import sinh2_minus_2, sinhc, tanhc


def test_limits_at_zero():
    assert sinhc(0.0) == 1.0
    assert tanhc(0.0) == 1.0
    assert sinh2_minus_2(0.0) == 0.0


@given(st.floats(1e-8, 20))
def test_sinhc_matches_direct_formula(z):
    assert sinhc(z) == pytest.approx(np.sinh(z) / z, rel=1e-13)


@given(st.floats(1e-8, 20))
def test_tanhc_matches_direct_formula(z):
    assert tanhc(z) == pytest.approx(np.tanh(z) / z, rel=1e-13)


def test_sinh2_minus_2_series_is_accurate_near_zero():
    # (sinh 2t - 2t) = 4t^3/3 + 4t^5/15 + 8t^7/315 + ...
    t = 1e-3
    assert sinh2_minus_2(t) == pytest.approx(4 * t**3 / 3 + 4 * t**5 / 15 + 8 * t**7 / 315, rel=1e-14)


@given(st.floats(0.5, 30))
def test_sinh2_minus_2_direct_branch(t):
    assert sinh2_minus_2(t) == pytest.approx(np.sinh(2 * t) - 2 * t, rel=1e-13)


def test_sinh2_minus_2_continuous_at_switch():
    lo, hi = sinh2_minus_2(0.5 - 1e-12), sinh2_minus_2(0.5 + 1e-12)
    assert hi == pytest.approx(lo, rel=1e-10)
