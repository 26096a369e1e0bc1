"""Closed intervals with exact rational endpoints.

Endpoints are :class:`fractions.Fraction`, so every operation here is exact
and the containment property holds without outward rounding.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from ._exact import to_fraction


@dataclass(frozen=True)
class Interval:
    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        lo, hi = to_fraction(self.lo), to_fraction(self.hi)
        if lo > hi:
            raise ValueError(f"empty interval [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def point(cls, x) -> Interval:
        x = to_fraction(x)
        return cls(x, x)

    @classmethod
    def hull_of(cls, values) -> Interval:
        values = [to_fraction(v) for v in values]
        return cls(min(values), max(values))

    # -- predicates -------------------------------------------------------

    @property
    def is_point(self) -> bool:
        return self.lo == self.hi

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    @property
    def mid(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def contains(self, x) -> bool:
        x = to_fraction(x)
        return self.lo <= x <= self.hi

    def __contains__(self, x) -> bool:
        return self.contains(x)

    def issubset(self, other: Interval) -> bool:
        return other.lo <= self.lo and self.hi <= other.hi

    def straddles_zero(self) -> bool:
        return self.lo <= 0 <= self.hi

    def hull(self, other: Interval) -> Interval:
        return Interval(min(self.lo, other.lo), max(self.hi, other.hi))

    def intersect(self, other: Interval) -> Interval | None:
        lo, hi = max(self.lo, other.lo), min(self.hi, other.hi)
        return Interval(lo, hi) if lo <= hi else None

    # -- arithmetic -------------------------------------------------------

    def __add__(self, other):
        other = _coerce(other)
        return Interval(self.lo + other.lo, self.hi + other.hi)

    __radd__ = __add__

    def __sub__(self, other):
        other = _coerce(other)
        return Interval(self.lo - other.hi, self.hi - other.lo)

    def __rsub__(self, other):
        return _coerce(other) - self

    def __neg__(self):
        return Interval(-self.hi, -self.lo)

    def __mul__(self, other):
        other = _coerce(other)
        products = (self.lo * other.lo, self.lo * other.hi,
                    self.hi * other.lo, self.hi * other.hi)
        return Interval(min(products), max(products))

    __rmul__ = __mul__

    def scale(self, c) -> Interval:
        c = to_fraction(c)
        a, b = c * self.lo, c * self.hi
        return Interval(min(a, b), max(a, b))

    def mag(self) -> Fraction:
        return max(abs(self.lo), abs(self.hi))

    def __str__(self):
        return f"[{self.lo}, {self.hi}]"


def _coerce(x) -> Interval:
    return x if isinstance(x, Interval) else Interval.point(x)


ZERO = Interval(0, 0)
ONE = Interval(1, 1)


def iv_add(a: Interval, b: Interval) -> Interval:
    return a + b


def iv_sub(a: Interval, b: Interval) -> Interval:
    return a - b


def iv_mul(a: Interval, b: Interval) -> Interval:
    return a * b


def iv_neg(a: Interval) -> Interval:
    return -a


def iv_scale(a: Interval, c) -> Interval:
    return a.scale(c)


def iv_mag(a: Interval) -> Fraction:
    """Sup-norm max(|lo|, |hi|)."""
    return a.mag()
