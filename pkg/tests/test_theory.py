import math

import pytest
from hypothesis import given, strategies as st

from seterm.theory import (LogBracket, RatePrediction, chaining_bound, classical_gap_rates, generic_ep_bounds,
                           risk_rate, set_sup_rate, sup_rate_prediction)


def test_classical_gap_rates():
    assert classical_gap_rates(0.5) == pytest.approx((-1 / 3, -1 / 3, False))
    lo, hi, flag = classical_gap_rates(2.0)
    assert (lo, hi, flag) == pytest.approx((-1 / 6, -1 / 8, False))
    assert classical_gap_rates(1.0) == pytest.approx((-0.25, -0.25, True))


def test_generic_ep_bounds():
    assert generic_ep_bounds(2.0) == pytest.approx((1 / 6, 1 / 4))
    assert generic_ep_bounds(3.0) == pytest.approx((1 / 4, 1 / 3))
    lo, hi = generic_ep_bounds(1.0 + 1e-9)
    assert abs(lo) < 1e-8 and abs(hi) < 1e-8


def test_chaining_bound_values():
    assert chaining_bound(0.5, 2, 1.0, 1e4) == pytest.approx(1.01, rel=1e-12)
    assert chaining_bound(3.0, 2, 1.0, 1e6) == pytest.approx(11.001, rel=1e-12)
    small = [chaining_bound(0.5, 2, s, 100) for s in (1e-2, 1e-4, 1e-6)]
    assert small[0] < small[1] < small[2] and small[2] > 1e1
    with pytest.raises(ValueError, match="boundary"):
        chaining_bound(2.0, 3, 0.5, 100)


def test_set_sup_rate():
    assert set_sup_rate(2.0, 1.0, 4096) == pytest.approx(4.0, rel=1e-12)
    assert set_sup_rate(0.5, 1.0, 10) == 1.0 and set_sup_rate(0.5, 1.0, 1e8) == 1.0
    n = 1e6
    s = n ** (-1 / 6)
    assert s ** (1 - 2.0) == pytest.approx(n ** (1 / 6), rel=1e-12)
    assert set_sup_rate(2.0, s, n) == pytest.approx(n ** (1 / 6), rel=1e-12)
    br = set_sup_rate(1.0, 1.0, 1000)
    assert isinstance(br, LogBracket) and br.lower == 1.0 and br.upper == pytest.approx(math.log(1000))


def test_risk_rate():
    assert risk_rate("image", {"alpha": 0.5}).exponent == pytest.approx(-2 / 3)
    iso3 = risk_rate("isotonic", {"d": 3})
    assert (iso3.exponent, iso3.log_power) == pytest.approx((-1 / 3, 1.0))
    iso2 = risk_rate("isotonic", {"d": 2})
    assert (iso2.exponent, iso2.log_power) == pytest.approx((-1 / 2, 2.0))
    sc = risk_rate("s-concave", {"d": 2})
    assert (sc.exponent, sc.log_power) == pytest.approx((-2 / 3, 2 / 3))
    with pytest.raises(ValueError):
        risk_rate("nonsense", {})


@given(st.floats(1.0 + 1e-6, 50.0))
def test_generic_bounds_ordered_and_improved(alpha):
    lo, hi = generic_ep_bounds(alpha)
    assert lo < hi
    assert sup_rate_prediction(alpha).exponent == pytest.approx(lo)
    assert set_sup_rate(alpha, 1.0, 1e6) == pytest.approx(1e6 ** lo)


@given(st.floats(0.05, 50.0))
def test_gap_rate_is_half_risk_rate(alpha):
    assert classical_gap_rates(alpha)[0] == pytest.approx(risk_rate("image", {"alpha": alpha}).exponent / 2)


def test_rate_prediction_normalization():
    p = RatePrediction("x", -0.5, 2.0)
    assert p.evaluate(100, 100, 3.0) == pytest.approx(3.0)
    assert p.evaluate(400, 100, 1.0) < 1.0
