"""Relative-entry ratio approximation and approximate comparison of a*e^y terms.

Both functions have a FixedPoint front end and a raw-integer core (``*_raw``)
that the estimators call in their inner loops.
"""

from __future__ import annotations

from .errors import FormatError
from .fixedpoint import FixedPoint, exp_raw, round_shift


def reaa_raw(A1: int, A2: int, b: int, Y1: int, Y2: int, yb2: int, c: int, d: int) -> int:
    """Raw core of relative_entry_additive_approx.

    A1, A2 are raw (0, b) values, Y1, Y2 raw values with yb2 trailing bits.
    Returns the raw (d, c) result.
    """
    cap = (1 << (d + c)) - 1
    if A2 == 0:
        return cap
    if A1 == 0:
        return 0
    D = Y1 - Y2
    if D > (b + d) << yb2:
        return cap
    if D < -((b + c) << yb2):
        return 0
    # alpha ~ e^D in (2(b+d), b+c+3); exp_raw is accurate to 2^-(b+c+3)
    pa = b + c + 3
    alpha = exp_raw(D, yb2, pa)
    # beta ~ a1/a2 in (b, 2(b+d)+c+3)
    pb = 2 * (b + d) + c + 3
    q, rem = divmod(A1 << pb, A2)
    if 2 * rem >= A2:
        q += 1
    prod = alpha * q  # exact product at pa + pb trailing bits
    shift = pa + pb - c
    capped = cap << shift
    if prod > capped:
        prod = capped
    return round_shift(prod, shift)


def _check_a(a: FixedPoint):
    if a.b1 != 0 or a.raw < 0:
        raise FormatError("a must be a non-negative (0, b) value")


def relative_entry_additive_approx(
    a1: FixedPoint, a2: FixedPoint, y1: FixedPoint, y2: FixedPoint, c: int, d: int
) -> FixedPoint:
    """2^-c additive approximation of min{(a1/a2) e^(y1-y2), 2^d - 2^-c}.

    a1, a2 are (0, b) values in [0, 1 - 2^-b]; y1, y2 share a (b1, b2) format.
    The result is in (d, c) format.  a1/a2 counts as infinite when a2 = 0.
    """
    _check_a(a1)
    _check_a(a2)
    if a1.b2 != a2.b2:
        raise FormatError("a1 and a2 must share the (0, b) format")
    if y1.format != y2.format:
        raise FormatError("y1 and y2 must share a format")
    if c < 1 or d < 1:
        raise FormatError("c and d must be positive")
    raw = reaa_raw(a1.raw, a2.raw, a1.b2, y1.raw, y2.raw, y1.b2, c, d)
    return FixedPoint(raw, d, c)


def geq_raw(A1: int, A2: int, b: int, Y1: int, Y2: int, yb2: int, c: int) -> bool:
    if A1 == A2 and Y1 == Y2:
        return True
    return reaa_raw(A1, A2, b, Y1, Y2, yb2, c, 1) >= (1 << c)


def greater_or_equal(a1: FixedPoint, a2: FixedPoint, y1: FixedPoint, y2: FixedPoint, c: int) -> bool:
    """Decide e^(y1-y2) a1/a2 >= 1 up to a multiplicative gap of 2^-c.

    True when the ratio is at least 1 + 2^-c or the two terms are identical,
    False when it is at most 1 - 2^-c.  Either answer may come back in between.
    """
    if (a1.raw, a1.b2, y1.raw) == (a2.raw, a2.b2, y2.raw) and y1.format == y2.format:
        return True
    return relative_entry_additive_approx(a1, a2, y1, y2, c, 1).raw >= (1 << c)
