import math
from fractions import Fraction as F

import pytest
from hypothesis import given, strategies as st

from probcert.formats import (DOUBLE, EXACT, SINGLE, ErrorTerm, NumberFormat, fixed,
                              floating, max_ulp, parse_format,
                              quantization_error_model, rounding_error_model, ulp_of)
from probcert.intervals import Interval

U16 = F(1, 2 ** 16)


def test_ulp_examples():
    assert ulp_of(1.0, SINGLE) == F(1, 2 ** 23)
    assert ulp_of(0.75, SINGLE) == F(1, 2 ** 24)
    assert ulp_of("123.4", fixed(-16)) == U16


def test_ulp_at_zero():
    with pytest.raises(ValueError, match="ulp undefined at zero"):
        ulp_of(0, SINGLE)
    assert ulp_of(0, fixed(-4)) == F(1, 16)


@given(st.floats(min_value=1e-30, max_value=1e30), st.integers(2, 53))
def test_float_ulp_brackets_value(v, p):
    u = ulp_of(v, floating(p))
    x = F(v)
    assert x * F(2) ** (1 - p) >= u > x * F(2) ** (-p)


@given(st.integers(-40, 10), st.fractions(min_value=-1000, max_value=1000))
def test_fixed_ulp_constant(lsb, v):
    assert ulp_of(v, fixed(lsb)) == F(2) ** lsb


def test_format_validation():
    with pytest.raises(ValueError):
        floating(1)
    with pytest.raises(ValueError):
        NumberFormat("fixed", None, None, "nearest")


@pytest.mark.parametrize("text", ["float(p=24)", "float(p=53)", "fixed(lsb=-16)",
                                  "fixed(lsb=-16,trunc)", "fixed(lsb=-16),trunc",
                                  "float(p=11,trunc)"])
def test_parse_format_roundtrip(text):
    f = parse_format(text)
    assert parse_format(str(f)) == f
    assert f.truncates == ("trunc" in text)


def test_parse_format_rejects_garbage():
    with pytest.raises(ValueError):
        parse_format("fixed(16)")


def test_representable():
    assert SINGLE.representable(0.0625) and not SINGLE.representable("0.1")
    assert DOUBLE.representable(0.1)
    assert fixed(-16).representable(F(3, 2 ** 16)) and not fixed(-16).representable(F(1, 2 ** 17))


def test_quantization_fixed():
    t = quantization_error_model(fixed(-16), Interval(-5, 7))
    assert (t.mean, t.variance_bound, t.worst_case) == (0, U16 ** 2 / 12, U16 / 2)


def test_quantization_float_unit_binade():
    # closed stand-in for [1, 2): the largest single below 2
    t = quantization_error_model(SINGLE, Interval(1, 2 - F(1, 2 ** 23)))
    u = F(1, 2 ** 23)
    assert (t.mean, t.variance_bound, t.worst_case) == (0, u * u / 12, u / 2)


def test_quantization_float_uses_max_ulp_over_range():
    hi = 2 - F(1, 2 ** 23)
    r = Interval("0.5", hi)
    sample = [r.lo + (r.hi - r.lo) * F(i, 1000) for i in range(1001)]
    u = max(ulp_of(v, SINGLE) for v in sample)
    assert u == F(1, 2 ** 23)
    assert quantization_error_model(SINGLE, r).variance_bound == u * u / 12


def test_zero_straddling_float_range():
    with pytest.raises(ValueError, match="unbounded relative quantization"):
        quantization_error_model(SINGLE, Interval(-1, 1))
    with pytest.raises(ValueError, match="unbounded relative quantization"):
        rounding_error_model("mul", SINGLE, Interval(0, 1))
    t = quantization_error_model(SINGLE, Interval(-1, 1), magnitude_floor=F(1, 2 ** 10))
    assert t.worst_case == F(1, 2 ** 24)
    # the floor bounds the ulp from below, so the max is still at the top
    assert max_ulp(SINGLE, Interval(-1, 1), F(1, 2 ** 10)) == F(1, 2 ** 23)


def test_rounding_examples():
    assert rounding_error_model("add", fixed(-16), Interval(-9, 9)) == EXACT
    assert rounding_error_model("sub", fixed(-16, "truncate"), Interval(-9, 9)) == EXACT
    t = rounding_error_model("mul", fixed(-16), Interval(-9, 9))
    assert (t.mean, t.variance_bound, t.worst_case) == (0, U16 ** 2 / 12, U16 / 2)


def test_truncation_mean_matches_enumeration():
    u = U16
    t = rounding_error_model("format_narrow", fixed(-16, "truncate"), Interval(0, 1))
    assert t.mean == -u / 2 and t.worst_case == u
    for fine_bits in (4, 8, 12):
        d = u / 2 ** fine_bits
        base = 37 * u
        errs = [math.floor((base + k * d) / u) * u - (base + k * d) for k in range(2 ** fine_bits)]
        avg = sum(errs, F(0)) / len(errs)
        assert abs(avg - t.mean) == d / 2
        assert max(abs(e) for e in errs) <= t.worst_case
        var = sum((e - avg) ** 2 for e in errs) / len(errs)
        assert var <= t.variance_bound


def test_truncation_toward_zero_on_negative_floats():
    t = rounding_error_model("mul", floating(24, "truncate"), Interval(-2, -1))
    assert t.mean > 0


@given(st.sampled_from(["add", "sub", "mul", "format_narrow"]),
       st.one_of(st.builds(fixed, st.integers(-30, 0), st.sampled_from(["nearest", "truncate"])),
                 st.builds(floating, st.integers(2, 53), st.sampled_from(["nearest", "truncate"]))),
       st.fractions(min_value=F(1, 2 ** 20), max_value=1000))
def test_error_term_invariants(kind, fmt, hi):
    t = rounding_error_model(kind, fmt, Interval(hi / 2, hi))
    assert 0 <= t.variance_bound <= t.worst_case ** 2
    assert abs(t.mean) <= t.worst_case
    assert t.zero_mean == (not fmt.truncates or t.is_exact)


def test_error_term_validation():
    with pytest.raises(ValueError):
        ErrorTerm(0, 1, F(1, 2))
    with pytest.raises(ValueError):
        ErrorTerm(1, 0, F(1, 2))
    with pytest.raises(ValueError):
        ErrorTerm(0, 0, 0, order="Z")
