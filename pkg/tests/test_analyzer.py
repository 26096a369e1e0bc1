import random
from fractions import Fraction as F

import pytest
from hypothesis import given, strategies as st

from probcert.analyzer import analyze, build_ledger, propagate_ranges
from probcert.bounds import certify
from probcert.intervals import Interval
from probcert.ir import (AnalysisError, BinOp, Name, Narrow, Neg, Num, ParseError,
                         parse_program, walk)

SENSOR_SUM = """
sensor x in [-1, 1] : fixed(lsb=-16);
var a = 0 in [-1000000, 1000000] : fixed(lsb=-16);
loop n=1000000 { a = a + x; }
output a;
"""

EULER = """
const h = 0.0625 : float(p=24);
const c = 0.75 : float(p=24);
var x = 0.5 in [0.25, 1] : float(p=24);
{assume}
loop n=1000 {{ x = x + h * (c - x); }}
output x;
"""


def euler(assume="assume magnitude_floor = 2^-20;"):
    return parse_program(EULER.format(assume=assume))


def test_parse_sensor_sum():
    ir = parse_program(SENSOR_SUM)
    assert list(ir.sensors) == ["x"] and len(ir.body) == 1
    assert ir.loop_count == 10 ** 6 and ir.output == "a"
    assert ir.sensors["x"].range == Interval(-1, 1)


def test_parse_euler():
    ir = euler()
    assert len(ir.consts) == 2 and len(ir.body) == 1
    assert ir.magnitude_floor == F(1, 2 ** 20)


@pytest.mark.parametrize("text, message", [
    ("var a = 0 in [0,1] : fixed(lsb=-4); loop n=3 { } output a;", "empty loop body"),
    ("var a = 0 in [0,1] : fixed(lsb=-4); loop n=3 { a = a / 2; } output a;",
     "unsupported: division"),
    ("var a = 0 in [0,1] : fixed(lsb=-4); loop n=3 { loop n=2 { a = a; } } output a;",
     "unsupported: nested loops"),
    ("var a = 0 in [0,1] : fixed(lsb=-4); loop n=3 { a = a + y; } output a;",
     "undefined name"),
    ("var a = 0 in [0,1] : fixed(lsb=-4); var b = 0 in [0,1] : fixed(lsb=-4);"
     " loop n=3 { b = b + a; a = a + b; } output a;", "only one loop-carried error path"),
    ("var a = 0 in [0,1] : fixed(lsb=-4); loop n=3 { a = a + 1; } ", "no output"),
    ("const h = 0.1 : float(p=24); var a = 0 in [0,1] : fixed(lsb=-4);"
     " loop n=3 { a = a + h; } output a;", "not representable"),
    ("var a = 0 in [0,1] : fixed(lsb=-4) loop n=3 { a = a; } output a;", "expected"),
])
def test_parse_errors(text, message):
    with pytest.raises(ParseError, match=message):
        parse_program(text)


def test_parse_error_location():
    with pytest.raises(ParseError) as info:
        parse_program("var a = 0 in [0,1] : fixed(lsb=-4);\nloop n=3 { a = a + q; }\noutput a;")
    assert (info.value.line, info.value.col) == (2, 20)
    assert str(info.value).startswith("2:20:")


def test_comments_and_power_literals():
    ir = parse_program("# comment\nsensor x in [-2^-3, 2^-3] : fixed(lsb=-8); # trailing\n"
                       "var a = 0 in [-9, 9] : fixed(lsb=-8);\n"
                       "loop n=8 { t = x * x : fixed(lsb=-10); a = a + narrow(t, fixed(lsb=-8)); }\n"
                       "output a;")
    assert ir.sensors["x"].range == Interval(F(-1, 8), F(1, 8))
    assert ir.body[0].fmt.lsb_exponent == -10
    assert any(isinstance(e, Narrow) for e in walk(ir.body[1].expr))


# ranges


def test_sensor_sum_range_stable():
    r = propagate_ranges(parse_program(SENSOR_SUM))
    assert r.method == "accumulation"
    assert r.carried == Interval(-10 ** 6, 10 ** 6)


def test_euler_range_invariant():
    ir = parse_program("var x = 0 in [0, 1] : float(p=53);"
                       " loop n=100 { x = x + 0.1 * (1 - x); } output x;")
    r = propagate_ranges(ir)
    assert r.method == "invariant"
    root = ir.body[0].expr
    assert r[root].issubset(Interval(F(1, 10), 1))


def test_range_divergence():
    ir = parse_program("sensor x in [0.5, 1] : fixed(lsb=-8);"
                       " var a = 0 in [0, 1] : fixed(lsb=-8);"
                       " loop n=100000 { a = a + x; } output a;")
    with pytest.raises(AnalysisError, match="range divergence"):
        propagate_ranges(ir)
    growing = parse_program("var a = 1 in [0, 100] : fixed(lsb=-8);"
                            " loop n=100 { a = a + a; } output a;")
    with pytest.raises(AnalysisError, match="declare a wider invariant range"):
        propagate_ranges(growing)


def _eval(e, env):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Name):
        return env[e.id]
    if isinstance(e, Neg):
        return -_eval(e.operand, env)
    if isinstance(e, Narrow):
        return _eval(e.operand, env)
    a, b = _eval(e.left, env), _eval(e.right, env)
    return {"add": a + b, "sub": a - b, "mul": a * b}[e.op]


@given(st.randoms(use_true_random=False))
def test_ranges_enclose_exact_evaluation(rnd):
    ir = euler()
    r = propagate_ranges(ir)
    env = {k: c.value for k, c in ir.consts.items()}
    lo, hi = ir.carried.range.lo, ir.carried.range.hi
    env["x"] = lo + (hi - lo) * F(rnd.randint(0, 1000), 1000)
    for e in walk(ir.body[0].expr):
        assert _eval(e, env) in r[e]


# ledgers


def test_sensor_sum_ledger():
    led = build_ledger(parse_program(SENSOR_SUM))
    u = F(1, 2 ** 16)
    assert led.steps == 10 ** 6 and len(led.blocks) == 1
    assert led.blocks[0].variance == u * u / 12
    assert led.drift_worst_case == 0
    assert led.zero_mean_certified and led.independence_certified
    assert led.total_variance == F(10 ** 6, 2 ** 32 * 12)
    assert float(certify(led, "0.01").failure_bound) == pytest.approx(0.19403, abs=1e-5)


def test_truncating_narrow_breaks_zero_mean():
    ir = parse_program(SENSOR_SUM.replace("fixed(lsb=-16);\nvar", "fixed(lsb=-24);\nvar")
                       .replace("a + x", "a + narrow(x, fixed(lsb=-16,trunc))"))
    an = analyze(ir)
    assert not an.ledger.zero_mean_certified
    assert certify(an.ledger, "0.01").mode == "worst_case_only"
    narrow = [e for e in an.events if "narrow" in e.site]
    assert narrow and narrow[0].term.mean == -F(1, 2 ** 17)


def test_fixed_add_of_coarser_operand_is_exact():
    ir = parse_program("sensor x in [-1, 1] : fixed(lsb=-8);"
                       " var a = 0 in [-100, 100] : fixed(lsb=-16);"
                       " loop n=100 { a = a + x; } output a;")
    an = analyze(ir)
    assert [e.site for e in an.events] == ["sensor x"]


def test_fixed_multiply_rounds():
    ir = parse_program("sensor x in [-1, 1] : fixed(lsb=-16);"
                       " const k = 0.75 : fixed(lsb=-16);"
                       " var a = 0 in [-100, 100] : fixed(lsb=-16);"
                       " loop n=100 { a = a + k * x; } output a;")
    an = analyze(ir)
    u = F(1, 2 ** 16)
    mul = next(e for e in an.events if e.site.endswith("(mul)"))
    assert mul.coefficient == Interval(1, 1)
    sensor = next(e for e in an.events if e.site == "sensor x")
    assert sensor.coefficient == Interval(F(3, 4), F(3, 4))
    assert an.ledger.blocks[0].variance == (1 + F(9, 16)) * u * u / 12


def test_euler_ledger():
    an = analyze(euler())
    h = F(1, 16)
    assert an.loop_coefficient == Interval(1 - h, 1 - h)
    sub = next(e for e in an.events if e.site.endswith("(sub)"))
    assert sub.coefficient == Interval(h, h)
    # c - x lies in [-1/4, 1/2]; its largest ulp is at 1/2
    u = F(1, 2 ** 24)
    assert sub.term.variance_bound == u * u / 12
    assert sub.variance_contribution == h * h * u * u / 12
    # loop coefficient != 1 without the assumption
    assert not an.ledger.independence_certified
    assert an.ledger.drift_worst_case > 0


def test_euler_conditional_zero_mean():
    an = analyze(euler("assume magnitude_floor = 2^-20; assume conditional_zero_mean;"))
    assert an.ledger.independence_certified
    assert any("conditional_zero_mean" in a for a in an.ledger.assumptions)


def test_euler_needs_magnitude_floor():
    with pytest.raises(AnalysisError, match="unbounded relative quantization"):
        analyze(euler(""))


def test_constant_representable_in_context():
    ir = parse_program("var x = 0 in [0, 1] : float(p=24);"
                       " loop n=10 { x = x + 0.1 * (1 - x); } output x;")
    with pytest.raises(AnalysisError, match="not representable"):
        analyze(ir)


@given(st.integers(-30, -4), st.integers(1, 10 ** 7), st.integers(0, 6))
def test_accumulation_ledger_formula(lsb, n, extra_bits):
    ir = parse_program(
        f"sensor x in [-1, 1] : fixed(lsb={lsb - extra_bits});"
        f" var a = 0 in [-{n}, {n}] : fixed(lsb={lsb});"
        f" loop n={n} {{ a = a + x; }} output a;")
    led = build_ledger(ir)
    u_s, u_a = F(2) ** (lsb - extra_bits), F(2) ** lsb
    expected = u_s * u_s / 12 + (u_a * u_a / 12 if extra_bits else 0)
    assert led.total_variance == n * expected
    assert led.drift_worst_case == 0 and led.admissible
