"""Number formats, ulp, and the stochastic model of a single rounding.

Every rounding or quantization event is summarised by an :class:`ErrorTerm`:
its mean, a bound on its variance and a bound on its absolute value.
Round-to-nearest gives a zero-mean term uniform on +-ulp/2; truncation gives
a biased term that the bound engine refuses to certify stochastically.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Literal

from ._exact import floor_log2, is_dyadic, lowest_set_exponent, to_fraction
from .intervals import Interval

Kind = Literal["fixed", "float"]
Rounding = Literal["nearest", "truncate"]
Order = Literal["X", "Y"]
OpKind = Literal["add", "sub", "mul", "div", "format_narrow"]

FIRST_ORDER: Order = "X"
HIGHER_ORDER: Order = "Y"


@dataclass(frozen=True)
class NumberFormat:
    kind: Kind
    precision: int | None = None     # significand bits incl. leading bit (float)
    lsb_exponent: int | None = None  # weight of the lsb is 2**lsb_exponent (fixed)
    rounding: Rounding = "nearest"

    def __post_init__(self):
        if self.kind == "float":
            if self.precision is None or self.precision < 2:
                raise ValueError("float formats need precision p >= 2")
            if self.lsb_exponent is not None:
                raise ValueError("float formats have no fixed lsb")
        elif self.kind == "fixed":
            if self.lsb_exponent is None:
                raise ValueError("fixed formats need an lsb exponent")
            if self.precision is not None:
                raise ValueError("fixed formats take lsb, not precision")
        else:
            raise ValueError(f"unknown format kind {self.kind!r}")
        if self.rounding not in ("nearest", "truncate"):
            raise ValueError(f"unknown rounding {self.rounding!r}")

    @property
    def is_fixed(self) -> bool:
        return self.kind == "fixed"

    @property
    def truncates(self) -> bool:
        return self.rounding == "truncate"

    def representable(self, value) -> bool:
        """Whether ``value`` is exactly on this format's grid."""
        v = to_fraction(value)
        if v == 0:
            return True
        if not is_dyadic(v):
            return False
        if self.is_fixed:
            return lowest_set_exponent(v) >= self.lsb_exponent
        return lowest_set_exponent(v) >= floor_log2(v) - self.precision + 1

    def __str__(self):
        trunc = ",trunc" if self.truncates else ""
        if self.is_fixed:
            return f"fixed(lsb={self.lsb_exponent}{trunc})"
        return f"float(p={self.precision}{trunc})"


def fixed(lsb: int, rounding: Rounding = "nearest") -> NumberFormat:
    return NumberFormat("fixed", lsb_exponent=lsb, rounding=rounding)


def floating(p: int, rounding: Rounding = "nearest") -> NumberFormat:
    return NumberFormat("float", precision=p, rounding=rounding)


SINGLE = floating(24)
DOUBLE = floating(53)

_FORMAT_RE = re.compile(
    r"^\s*(float|fixed)\s*\(\s*(p|lsb)\s*=\s*([+-]?\d+)\s*(,\s*trunc\s*)?\)\s*(,\s*trunc\s*)?$")


def parse_format(text: str) -> NumberFormat:
    """Read ``float(p=24)``, ``fixed(lsb=-16)``, with optional ``,trunc``."""
    m = _FORMAT_RE.match(text)
    if not m:
        raise ValueError(f"bad format literal {text!r}")
    kind, key, num, inner_trunc, outer_trunc = m.groups()
    if (kind == "float") != (key == "p"):
        raise ValueError(f"bad format literal {text!r}: {kind} takes "
                         f"{'p' if kind == 'float' else 'lsb'}=")
    rounding = "truncate" if (inner_trunc or outer_trunc) else "nearest"
    if kind == "float":
        return floating(int(num), rounding)
    return fixed(int(num), rounding)


def ulp_of(value, fmt: NumberFormat) -> Fraction:
    """Unit in the last place 2**(e - p + 1); constant 2**lsb in fixed point."""
    if fmt.is_fixed:
        return Fraction(2) ** fmt.lsb_exponent
    v = to_fraction(value)
    if v == 0:
        raise ValueError("ulp undefined at zero")
    return Fraction(2) ** (floor_log2(v) - fmt.precision + 1)


def max_ulp(fmt: NumberFormat, value_range: Interval,
            magnitude_floor=None) -> Fraction:
    """Largest ulp over a range of values.

    For floats the ulp grows with magnitude, so it is the ulp at the endpoint
    of largest magnitude.  A float range touching zero is rejected unless a
    positive magnitude floor is given, which the caller takes responsibility
    for (values below it are assumed not to carry a larger ulp).
    """
    if fmt.is_fixed:
        return ulp_of(0, fmt)
    if value_range.straddles_zero():
        if magnitude_floor is None or to_fraction(magnitude_floor) <= 0:
            raise ValueError("unbounded relative quantization: float range "
                             f"{value_range} contains 0; supply a magnitude "
                             "floor or use fixed point")
    mag = value_range.mag()
    if magnitude_floor is not None:
        mag = max(mag, to_fraction(magnitude_floor))
    return ulp_of(mag, fmt)


@dataclass(frozen=True)
class ErrorTerm:
    """One random error event.

    ``variance_bound`` is a bound on the variance about ``mean`` and
    ``worst_case`` bounds the absolute error.
    """
    mean: Fraction
    variance_bound: Fraction
    worst_case: Fraction
    order: Order = FIRST_ORDER

    def __post_init__(self):
        for name in ("mean", "variance_bound", "worst_case"):
            object.__setattr__(self, name, to_fraction(getattr(self, name)))
        if self.variance_bound < 0 or self.worst_case < 0:
            raise ValueError("variance and worst case must be nonnegative")
        if self.variance_bound > self.worst_case ** 2:
            raise ValueError("variance bound exceeds worst_case**2")
        if abs(self.mean) > self.worst_case:
            raise ValueError("mean exceeds worst case")
        if self.order not in (FIRST_ORDER, HIGHER_ORDER):
            raise ValueError(f"unknown order {self.order!r}")

    @property
    def zero_mean(self) -> bool:
        return self.mean == 0

    @property
    def is_exact(self) -> bool:
        return self.worst_case == 0


EXACT = ErrorTerm(0, 0, 0)


def _uniform_term(u: Fraction) -> ErrorTerm:
    return ErrorTerm(0, u * u / 12, u / 2)


def quantization_error_model(fmt: NumberFormat, value_range: Interval,
                             magnitude_floor=None) -> ErrorTerm:
    """Sensor reading modelled as uniform on +-u/2, u the largest ulp in range."""
    return _uniform_term(max_ulp(fmt, value_range, magnitude_floor))


def rounding_error_model(op_kind: OpKind, fmt: NumberFormat,
                         result_range: Interval, magnitude_floor=None) -> ErrorTerm:
    if op_kind not in ("add", "sub", "mul", "div", "format_narrow"):
        raise ValueError(f"unknown operation {op_kind!r}")
    if fmt.is_fixed and op_kind in ("add", "sub"):
        # in-format fixed-point add/sub lands on the grid
        return EXACT
    u = max_ulp(fmt, result_range, magnitude_floor)
    if not fmt.truncates:
        return _uniform_term(u)
    # truncation: error uniform on (-u, 0] (floor / chop of a positive value)
    mean = -u / 2
    if not fmt.is_fixed and result_range.hi < 0:
        mean = u / 2  # chopping toward zero on negative values
    return ErrorTerm(mean, u * u / 12, u)
