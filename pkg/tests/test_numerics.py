import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

import oracles
from scalebal.errors import FormatError
from scalebal.fixedpoint import FixedPoint, encode_rational
from scalebal.numerics import greater_or_equal, reaa_raw, relative_entry_additive_approx


def a(q, b=8):
    return encode_rational(q, (0, b))


def y(q, b1=4, b2=8):
    return encode_rational(q, (b1, b2))


def test_equal_entries_give_one():
    g = relative_entry_additive_approx(a(Fraction(1, 2)), a(Fraction(1, 2)), y(0), y(0), 10, 2)
    assert g.value == 1 and g.format == (2, 10)


def test_zero_denominator_saturates():
    g = relative_entry_additive_approx(a(Fraction(1, 4)), a(0), y(0), y(0), 6, 2)
    assert g.value == 4 - Fraction(1, 64)


def test_zero_numerator():
    assert relative_entry_additive_approx(a(0), a(Fraction(1, 4)), y(3), y(0), 6, 2).raw == 0


def test_frozen_ratio_value():
    # a1 = 1/3 at b = 12, a2 = 1, e^(1/2): oracle gives 563 / 2^10 for the exact ratio
    a1 = encode_rational(Fraction(1, 3), (0, 12))
    a2 = encode_rational(Fraction(4095, 4096), (0, 12))
    g = relative_entry_additive_approx(a1, a2, y(Fraction(1, 2)), y(0), 10, 2)
    target = oracles.reaa_target(a1.value, a2.value, Fraction(1, 2), 10, 2)
    assert abs(oracles.mp(g.value) - target) <= oracles.mp(Fraction(1, 1024))
    assert g.raw == 563


def test_format_checks():
    with pytest.raises(FormatError):
        relative_entry_additive_approx(y(0), a(0), y(0), y(0), 4, 1)
    with pytest.raises(FormatError):
        relative_entry_additive_approx(a(0), a(0, 6), y(0), y(0), 4, 1)
    with pytest.raises(FormatError):
        relative_entry_additive_approx(a(0), a(0), y(0), y(0, 3, 8), 4, 1)


@given(
    st.integers(0, 255), st.integers(0, 255), st.integers(-1024, 1024), st.integers(-1024, 1024),
    st.integers(1, 16), st.integers(1, 5),
)
def test_reaa_contract(A1, A2, Y1, Y2, c, d):
    g = reaa_raw(A1, A2, 8, Y1, Y2, 6, c, d)
    target = oracles.reaa_target(Fraction(A1, 256), Fraction(A2, 256), Fraction(Y1 - Y2, 64), c, d)
    assert abs(oracles.ref.ldexp(g, -c) - target) <= oracles.ref.ldexp(1, -c)


@given(st.integers(1, 255), st.integers(1, 255), st.integers(-300, 300), st.integers(-300, 300))
def test_geq_contract(A1, A2, Y1, Y2):
    c = 6
    ratio = oracles.mp(Fraction(A1, A2)) * oracles.ref.exp(oracles.mp(Fraction(Y1 - Y2, 64)))
    ans = greater_or_equal(FixedPoint(A1, 0, 8), FixedPoint(A2, 0, 8), FixedPoint(Y1, 4, 6), FixedPoint(Y2, 4, 6), c)
    if ratio >= 1 + oracles.mp(Fraction(1, 64)):
        assert ans
    if ratio <= 1 - oracles.mp(Fraction(1, 64)):
        assert not ans


def test_geq_identical_terms():
    t = FixedPoint(5, 0, 8)
    assert greater_or_equal(t, t, y(1), y(1), 3)
