"""Exactness guarantees of the rational conversion helpers."""

import math
from decimal import Decimal
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from conmot.rationals import as_fraction, ratio_to_float


def test_float_input_converts_to_its_exact_binary_value():
    assert as_fraction(0.5) == Fraction(1, 2)
    assert as_fraction(0.1) == Fraction(0.1)  # the binary value, not 1/10
    assert as_fraction(0.1) != Fraction(1, 10)


def test_decimal_string_is_taken_at_face_value():
    assert as_fraction("0.1") == Fraction(1, 10)
    assert as_fraction("-3/7") == Fraction(-3, 7)
    assert as_fraction(Decimal("2.25")) == Fraction(9, 4)


def test_int_and_fraction_pass_through():
    assert as_fraction(7) == Fraction(7)
    f = Fraction(22, 7)
    assert as_fraction(f) is f


def test_bool_and_nonfinite_inputs_are_rejected():
    with pytest.raises(TypeError):
        as_fraction(True)
    with pytest.raises(ValueError):
        as_fraction(math.inf)
    with pytest.raises(ValueError):
        as_fraction(math.nan)


def test_ratio_to_float_basics():
    assert ratio_to_float(1, 2) == 0.5
    assert ratio_to_float(-3, 4) == -0.75
    assert ratio_to_float(0, 123456789) == 0.0
    with pytest.raises(ZeroDivisionError):
        ratio_to_float(1, 0)


def test_ratio_to_float_handles_huge_integers():
    """Magnitudes far past the float range saturate instead of raising."""
    big = 7 ** 3000
    assert ratio_to_float(big, 1) == math.inf
    assert ratio_to_float(-big, 1) == -math.inf
    assert ratio_to_float(1, big) == 0.0
    # A huge ratio near 1 still comes out exact.
    assert ratio_to_float(big * 3, big * 2) == 1.5


@given(
    st.integers(min_value=-(10**40), max_value=10**40),
    st.integers(min_value=1, max_value=10**40),
)
def test_ratio_to_float_matches_fraction_rounding_closely(num, den):
    got = ratio_to_float(num, den)
    want = float(Fraction(num, den))
    if want == 0.0:
        assert got == 0.0
    else:
        # The 64-bit window argument allows at most one ulp of slack.
        assert got == pytest.approx(want, rel=1e-15)
