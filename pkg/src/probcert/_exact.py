"""Conversions into exact rationals."""

from decimal import Decimal
from fractions import Fraction
import numbers
import math

Rational = Fraction


def to_fraction(x) -> Fraction:
    """Exact rational value of ``x``.

    Strings are read as decimals or ``p/q`` without passing through binary
    floating point, so ``"0.01"`` is exactly 1/100.  Binary floats convert
    to the exact dyadic they hold.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(x, numbers.Integral):
        return Fraction(int(x))
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, Decimal):
        return Fraction(x)
    if isinstance(x, numbers.Real):
        f = float(x)
        if not math.isfinite(f):
            raise ValueError(f"non-finite value {x!r}")
        return Fraction(f)
    raise TypeError(f"cannot convert {type(x).__name__} to a rational")


def float_up(x: Fraction) -> float:
    """Smallest float >= x."""
    f = float(x)
    if math.isfinite(f) and Fraction(f) < x:
        f = math.nextafter(f, math.inf)
    return f


def float_down(x: Fraction) -> float:
    """Largest float <= x."""
    f = float(x)
    if math.isfinite(f) and Fraction(f) > x:
        f = math.nextafter(f, -math.inf)
    return f


def floor_log2(x: Fraction) -> int:
    """The integer e with 2**e <= |x| < 2**(e+1); x must be nonzero."""
    x = abs(x)
    if x == 0:
        raise ValueError("log2 of zero")
    e = x.numerator.bit_length() - x.denominator.bit_length()
    if Fraction(2) ** e > x:
        e -= 1
    return e


def is_dyadic(x: Fraction) -> bool:
    d = x.denominator
    return d & (d - 1) == 0


def lowest_set_exponent(x: Fraction) -> int | None:
    """Largest e such that x is an integer multiple of 2**e (None for 0).

    Raises ValueError for non-dyadic rationals, which sit on no binary grid.
    """
    if x == 0:
        return None
    if not is_dyadic(x):
        raise ValueError(f"{x} is not a dyadic rational")
    num = abs(x.numerator)
    tz = (num & -num).bit_length() - 1
    return tz - (x.denominator.bit_length() - 1)
