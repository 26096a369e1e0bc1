from fractions import Fraction as F

import pytest
from hypothesis import given, strategies as st

from probcert.intervals import (Interval, ONE, ZERO, iv_add, iv_mag, iv_mul, iv_neg,
                                iv_scale, iv_sub)

rationals = st.fractions(min_value=-100, max_value=100, max_denominator=64)


@st.composite
def intervals(draw):
    a, b = draw(rationals), draw(rationals)
    return Interval(min(a, b), max(a, b))


@st.composite
def interval_with_point(draw):
    iv = draw(intervals())
    t = draw(st.fractions(min_value=0, max_value=1, max_denominator=32))
    return iv, iv.lo + t * (iv.hi - iv.lo)


def test_examples():
    assert iv_add(Interval(1, 2), Interval(3, 5)) == Interval(4, 7)
    assert iv_mul(Interval(0, 0), Interval(-9, 9)) == Interval(0, 0)
    assert iv_mag(Interval(-3, 2)) == 3
    assert iv_mag(Interval(0, 0)) == 0
    assert iv_mag(Interval("1.5", "2.5")) == F(5, 2)


def test_mul_matches_grid_oracle():
    a, b = Interval(-1, 2), Interval(3, 4)
    grid_a = [a.lo + (a.hi - a.lo) * F(i, 40) for i in range(41)]
    grid_b = [b.lo + (b.hi - b.lo) * F(i, 40) for i in range(41)]
    products = [x * y for x in grid_a for y in grid_b]
    assert iv_mul(a, b) == Interval(min(products), max(products)) == Interval(-4, 8)


def test_rejects_inverted_bounds():
    with pytest.raises(ValueError):
        Interval(2, 1)


def test_endpoints_are_exact():
    iv = Interval("0.1", 0.1)
    assert iv.lo == F(1, 10) and iv.hi == F(0.1)
    assert iv.lo < iv.hi


def test_set_operations():
    a, b = Interval(0, 2), Interval(1, 3)
    assert a.hull(b) == Interval(0, 3)
    assert a.intersect(b) == Interval(1, 2)
    assert a.intersect(Interval(5, 6)) is None
    assert 1 in a and 3 not in a
    assert Interval(1, 2).issubset(a)
    assert Interval(0, 1).straddles_zero() and not Interval(F(1, 9), 1).straddles_zero()
    assert ZERO.is_point and ONE.mid == 1


@given(interval_with_point(), interval_with_point())
def test_binary_ops_enclose_pointwise_results(ax, by):
    (a, x), (b, y) = ax, by
    assert x + y in iv_add(a, b)
    assert x - y in iv_sub(a, b)
    assert x * y in iv_mul(a, b)


@given(interval_with_point(), rationals)
def test_unary_ops_enclose(ax, c):
    a, x = ax
    assert -x in iv_neg(a)
    assert c * x in iv_scale(a, c)
    assert abs(x) <= iv_mag(a)


@given(intervals(), intervals())
def test_mul_is_tight_at_corners(a, b):
    corners = {x * y for x in (a.lo, a.hi) for y in (b.lo, b.hi)}
    r = iv_mul(a, b)
    assert r.lo in corners and r.hi in corners


@given(intervals(), intervals(), intervals())
def test_inclusion_monotone(a, b, c):
    big = a.hull(b)
    assert iv_mul(a, c).issubset(iv_mul(big, c))
    assert iv_add(a, c).issubset(iv_add(big, c))
