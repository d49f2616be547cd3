"""Small helpers for exact rational bookkeeping.

Floats are dyadic rationals, so Fraction(float) is exact; decimal strings and
Decimal values are parsed exactly as written. These helpers centralize that
conversion plus a shift-based float emission that avoids reducing huge
fractions just to print them.
"""

from __future__ import annotations

import math
from decimal import Decimal
from fractions import Fraction

__all__ = ["as_fraction", "ratio_to_float"]


def as_fraction(value) -> Fraction:
    """Exact Fraction from int, float, Fraction, Decimal, or numeric string."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError("cannot convert a non-finite float to a rational")
        return Fraction(value)
    if isinstance(value, (str, Decimal)):
        return Fraction(value)
    # numpy scalars and anything else float-like
    return Fraction(float(value))


def ratio_to_float(num: int, den: int) -> float:
    """num/den as a float without reducing the fraction.

    Uses 64-bit leading windows of both integers, so the relative error is
    below one float64 ulp; magnitudes beyond the float range round to +-inf.
    """
    num = int(num)
    den = int(den)
    if den == 0:
        raise ZeroDivisionError("ratio_to_float with zero denominator")
    if num == 0:
        return 0.0
    sign = -1.0 if (num < 0) != (den < 0) else 1.0
    num, den = abs(num), abs(den)
    nb, db = num.bit_length(), den.bit_length()
    top_n = num >> (nb - 64) if nb > 64 else num << (64 - nb)
    top_d = den >> (db - 64) if db > 64 else den << (64 - db)
    try:
        return sign * math.ldexp(top_n / top_d, nb - db)
    except OverflowError:
        return sign * math.inf
