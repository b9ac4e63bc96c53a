"""Signed fixed-point numbers in (b1, b2) format.

A value in format (b1, b2) is an integer multiple of 2**-b2 whose magnitude is
at most 2**b1 - 2**-b2.  Internally it is stored as that integer (``raw``), so
arithmetic on values with a shared trailing-bit count is plain integer
arithmetic.

The transcendental kernels (exp, ln, arcsin of a square root, squared sine)
work on scaled integers.  Each one returns the value correctly rounded to the
output format: an approximation with a known error bound is computed at
(output bits + guard bits) and, if it lands too close to a rounding midpoint,
recomputed with a wider working precision.  Correct rounding gives the
2**-b4 accuracy contract, monotonicity and platform independence for free.
"""

from __future__ import annotations

import re
from fractions import Fraction
from functools import lru_cache
from typing import Tuple, Union

from .errors import DomainError, FixedPointOverflow, FormatError

GUARD_BITS = 8
RATIONAL_BIT_CAP = 64

Format = Tuple[int, int]
RationalLike = Union[Fraction, int, str]


# --------------------------------------------------------------------------
# integer helpers


def round_shift(a: int, shift: int) -> int:
    """Return a / 2**shift rounded to the nearest integer, ties away from zero."""
    if shift <= 0:
        return a << -shift
    if a >= 0:
        return (a + (1 << (shift - 1))) >> shift
    return -((-a + (1 << (shift - 1))) >> shift)


def round_div(num: int, den: int) -> int:
    """Nearest integer to num/den (den > 0), ties away from zero."""
    q, r = divmod(abs(num), den)
    if 2 * r >= den:
        q += 1
    return q if num >= 0 else -q


def ceil_log2(q: RationalLike) -> int:
    """Exact ceil(log2(q)) for a positive rational."""
    q = as_fraction(q)
    return _ceil_log2_int(q.numerator, q.denominator)


@lru_cache(maxsize=1 << 12)
def _ceil_log2_int(num: int, den: int) -> int:
    if num <= 0:
        raise DomainError("ceil_log2 needs a positive argument")
    k = num.bit_length() - den.bit_length()
    # smallest k with num <= den * 2**k, compared on integers
    while not _le_pow2(num, den, k):
        k += 1
    while _le_pow2(num, den, k - 1):
        k -= 1
    return k


def _le_pow2(num: int, den: int, k: int) -> bool:
    return num <= den << k if k >= 0 else num << -k <= den


def _pow2(k: int) -> Fraction:
    return Fraction(1 << k) if k >= 0 else Fraction(1, 1 << -k)


def as_fraction(q) -> Fraction:
    """Convert ints, Fractions, floats (exactly) and 'num/den' strings."""
    if isinstance(q, Fraction):
        return q
    if isinstance(q, str):
        return Fraction(q.strip())
    return Fraction(q)


def check_rational(q: RationalLike, cap: int = RATIONAL_BIT_CAP) -> Fraction:
    """Validate a non-negative input rational against the bit-size cap."""
    q = as_fraction(q)
    if q < 0:
        raise DomainError(f"rational {q} is negative")
    if q.numerator.bit_length() > cap or q.denominator.bit_length() > cap:
        raise DomainError(f"rational {q} exceeds the {cap}-bit cap")
    return q


# --------------------------------------------------------------------------
# the value type


class FixedPoint:
    """A signed number sign * magnitude * 2**-b2 with |value| < 2**b1."""

    __slots__ = ("raw", "b1", "b2")

    def __init__(self, raw: int, b1: int, b2: int):
        if b1 < 0 or b2 < 0:
            raise FormatError(f"bad format ({b1},{b2})")
        if abs(raw) >> (b1 + b2):
            raise FixedPointOverflow(f"raw {raw} does not fit in ({b1},{b2})")
        self.raw = raw
        self.b1 = b1
        self.b2 = b2

    # convenience views
    @property
    def sign(self) -> int:
        return -1 if self.raw < 0 else 1

    @property
    def magnitude_bits(self) -> int:
        return abs(self.raw)

    @property
    def format(self) -> Format:
        return (self.b1, self.b2)

    @property
    def value(self) -> Fraction:
        return Fraction(self.raw, 1 << self.b2)

    def __float__(self) -> float:
        return self.raw / (1 << self.b2)

    def __neg__(self) -> "FixedPoint":
        return FixedPoint(-self.raw, self.b1, self.b2)

    def __eq__(self, other) -> bool:
        if isinstance(other, FixedPoint):
            return self.value == other.value
        return NotImplemented

    def __lt__(self, other: "FixedPoint") -> bool:
        return self.value < other.value

    def __le__(self, other: "FixedPoint") -> bool:
        return self.value <= other.value

    def __hash__(self) -> int:
        return hash(self.value)

    def __repr__(self) -> str:
        return f"FixedPoint({self.to_string()})"

    def to_string(self) -> str:
        return format_fixed(self)

    def rescale(self, fmt: Format) -> "FixedPoint":
        """Re-encode in another format (rounding if trailing bits shrink)."""
        b1, b2 = fmt
        return FixedPoint(_fit(round_shift(self.raw, self.b2 - b2), b1, b2), b1, b2)

    @classmethod
    def zero(cls, fmt: Format) -> "FixedPoint":
        return cls(0, *fmt)


def _fit(raw: int, b1: int, b2: int) -> int:
    if abs(raw) >> (b1 + b2):
        raise FixedPointOverflow(f"value {Fraction(raw, 1 << b2)} does not fit in ({b1},{b2})")
    return raw


def encode_rational(q: RationalLike, fmt: Format) -> FixedPoint:
    """Nearest multiple of 2**-b2 to q (ties away from zero)."""
    b1, b2 = fmt
    q = as_fraction(q)
    if abs(q) >= (1 << b1):
        raise FixedPointOverflow(f"|{q}| >= 2**{b1}")
    raw = round_div(q.numerator << b2, q.denominator)
    return FixedPoint(_fit(raw, b1, b2), b1, b2)


def encode_rational_saturating(q: RationalLike, fmt: Format) -> FixedPoint:
    """Like encode_rational but clamps to the largest magnitude of the format."""
    b1, b2 = fmt
    q = as_fraction(q)
    top = (1 << (b1 + b2)) - 1
    raw = round_div(q.numerator << b2, q.denominator)
    return FixedPoint(max(-top, min(top, raw)), b1, b2)


_TEXT = re.compile(r"^([+-])([01]+)\.([01]*)@\((\d+),(\d+)\)$")


def format_fixed(x: FixedPoint) -> str:
    """Text form '+<int>.<frac>@(b1,b2)' with binary digits."""
    mag = abs(x.raw)
    ip = mag >> x.b2
    frac = mag & ((1 << x.b2) - 1)
    fs = format(frac, f"0{x.b2}b") if x.b2 else ""
    return f"{'-' if x.raw < 0 else '+'}{ip:b}.{fs}@({x.b1},{x.b2})"


def parse_fixed(text: str) -> FixedPoint:
    m = _TEXT.match(text.strip())
    if not m:
        raise FormatError(f"cannot parse fixed-point text {text!r}")
    sgn, ip, fs, b1, b2 = m.groups()
    b1, b2 = int(b1), int(b2)
    if len(fs) != b2:
        raise FormatError(f"expected {b2} fraction digits in {text!r}")
    mag = (int(ip, 2) << b2) | (int(fs, 2) if fs else 0)
    return FixedPoint(-mag if sgn == "-" else mag, b1, b2)


# --------------------------------------------------------------------------
# constants at arbitrary precision, floor-accurate to a couple of ulps


@lru_cache(maxsize=None)
def _ln2(w: int) -> int:
    # ln 2 = sum 1/(k 2^k)
    ww = w + 12
    total, k, term = 0, 1, 1 << ww
    while True:
        term >>= 1
        if not term:
            break
        total += term // k
        k += 1
    return total >> 12


def _atan_inv(x: int, w: int) -> int:
    power = (1 << w) // x
    total, x2, k, sgn = power, x * x, 1, -1
    while power:
        power //= x2
        k += 2
        total += sgn * (power // k)
        sgn = -sgn
    return total


@lru_cache(maxsize=None)
def _pi(w: int) -> int:
    ww = w + 12
    return (16 * _atan_inv(5, ww) - 4 * _atan_inv(239, ww)) >> 12


# --------------------------------------------------------------------------
# kernels: each takes a working precision w and returns (approx, err) where
# |approx - true * 2**w| <= err


def _exp_kernel(w: int, X: int, s: int):
    k = round(X / (1 << s) / 0.6931471805599453)
    wr = w + k
    if wr < 4:
        return 0, 1  # e^x < 2^(-w+4): rounds to zero at the output scale
    kb = abs(k).bit_length() + 2
    xr = X << (wr - s) if wr >= s else X >> (s - wr)
    r = xr - ((k * _ln2(wr + kb)) >> kb)
    one = 1 << wr
    total, term, i = one, one, 1
    while term:
        term = (term * r >> wr) // i
        total += term
        i += 1
    return total, i + 6


def _atanh_series(z: int, w: int) -> Tuple[int, int]:
    if z < 0:
        t, k = _atanh_series(-z, w)
        return -t, k
    z2 = z * z >> w
    total, power, k = z, z, 1
    while power:
        power = power * z2 >> w
        k += 2
        total += power // k
    return total, k


def _ln_kernel(w: int, X: int, s: int):
    nb = X.bit_length()
    k = nb - 1 - s
    # mantissa M = X / 2^(nb-1) in [1, 2) at scale w
    M = X << (w - nb + 1) if w >= nb - 1 else X >> (nb - 1 - w)
    one = 1 << w
    if M * M > 2 * one * one:
        M >>= 1
        k += 1
    z = ((M - one) << w) // (M + one)
    at, terms = _atanh_series(z, w)
    kb = abs(k).bit_length() + 2
    return k * _ln2(w + kb) // (1 << kb) + 2 * at, 2 * terms + 8


def _atan_small(t: int, w: int) -> Tuple[int, int]:
    """atan(t) for 0 <= t <= 1 at scale w via two half-angle reductions."""
    one = 1 << w
    from math import isqrt

    for _ in range(2):
        sq = isqrt(one * one + t * t)
        t = (t << w) // (one + sq)
    t2 = t * t >> w
    total, power, k, sgn = t, t, 1, -1
    while power:
        power = power * t2 >> w
        k += 2
        total += sgn * (power // k)
        sgn = -sgn
    return 4 * total, 4 * (k + 4)


def _asin_sqrt_kernel(w: int, V: int, s: int):
    from math import isqrt

    full = 1 << s
    if V <= 0:
        return 0, 0
    if V >= full:
        return _pi(w + 2) >> 3, 2  # pi/2 at scale w
    if 2 * V <= full:
        t = isqrt((V << (2 * w)) // (full - V))
        a, e = _atan_small(t, w)
        return a, e + 2
    t = isqrt(((full - V) << (2 * w)) // V)
    a, e = _atan_small(t, w)
    return (_pi(w + 2) >> 3) - a, e + 4


def _sin_sq_reduced(u: int, w: int) -> Tuple[int, int]:
    """sin(u)^2 for |u| <= pi/4 (+tiny) at scale w."""
    u2 = u * u >> w
    total, term, i = u, u, 1
    while term:
        term = -(term * u2 >> w) // ((i + 1) * (i + 2))
        total += term
        i += 2
    return total * total >> w, 2 * i + 8


def _sin_sq_kernel(w: int, X: int, s: int, pi_multiple: bool):
    ww = w + 4
    if pi_multiple:
        # theta = pi * X / 2^s; sin^2 has period 1 in X / 2^s
        full = 1 << s
        B = X % full
        B = min(B, full - B)
        flip = 4 * B > full
        if flip:
            B = (full >> 1) - B
        u = (_pi(ww) * B) >> s
    else:
        extra = max(abs(X).bit_length() - s, 0) + 4
        w2 = ww + extra
        pi2 = _pi(w2)
        theta = X << (w2 - s) if w2 >= s else X >> (s - w2)
        rem = theta % pi2
        if 2 * rem > pi2:
            rem = pi2 - rem
        flip = 4 * rem > pi2
        if flip:
            rem = (pi2 >> 1) - rem
        u = rem >> extra
    v, e = _sin_sq_reduced(u, ww)
    if flip:
        v = (1 << ww) - v
    return v >> 4, e // 16 + 4


def _correctly_rounded(kernel, p: int, *args) -> int:
    """Run kernel at growing precision until rounding to scale p is certain."""
    g = GUARD_BITS + p.bit_length()
    a = 0
    shift = g
    for extra in (0, 32, 96, 224, 480):
        w = p + g + extra
        a, err = kernel(w, *args)
        shift = w - p
        rem = a & ((1 << shift) - 1)
        if abs(rem - (1 << (shift - 1))) > err:
            break
    return round_shift(a, shift)


def _out(raw: int, fmt: Format, what: str) -> FixedPoint:
    b3, b4 = fmt
    if abs(raw) >> (b3 + b4):
        raise FixedPointOverflow(f"{what} result does not fit in ({b3},{b4})")
    return FixedPoint(raw, b3, b4)


# raw-level entry points used by the hot loops elsewhere in the package


def exp_raw(X: int, s: int, p: int) -> int:
    """round(e^(X/2^s) * 2^p)."""
    return _correctly_rounded(_exp_kernel, p, X, s)


@lru_cache(maxsize=1 << 16)
def ln_raw(X: int, s: int, p: int) -> int:
    """round(ln(X/2^s) * 2^p) for X > 0."""
    if X <= 0:
        raise DomainError("logarithm of a non-positive number")
    return _correctly_rounded(_ln_kernel, p, X, s)


def asin_sqrt_raw(V: int, s: int, p: int) -> int:
    return _correctly_rounded(_asin_sqrt_kernel, p, V, s)


def sin_sq_raw(X: int, s: int, p: int, pi_multiple: bool = False) -> int:
    if pi_multiple and (4 * X) % (1 << s) == 0:
        # beta a multiple of 1/4: the value is exactly 0, 1/2 or 1 and may sit
        # on a rounding midpoint, so do it in rationals
        exact = (0, 1, 2, 1)[((4 * X) >> s) % 4]
        return round_shift(exact << p, 1)
    return _correctly_rounded(_sin_sq_kernel, p, X, s, pi_multiple)


# public FixedPoint API


def exp_fp(x: FixedPoint, out_fmt: Format) -> FixedPoint:
    """e^x rounded to out_fmt; Overflow if it does not fit."""
    b3, b4 = out_fmt
    # cheap early exit so a huge x does not drive the working precision up
    if x.raw > 0 and (x.raw >> x.b2) >= (b3 + 1):
        raise FixedPointOverflow(f"e^{float(x)} >= 2^{b3}")
    return _out(exp_raw(x.raw, x.b2, b4), out_fmt, "exp")


def ln_fp(x: FixedPoint, out_fmt: Format) -> FixedPoint:
    if x.raw <= 0:
        raise DomainError("ln of a non-positive number")
    return _out(ln_raw(x.raw, x.b2, out_fmt[1]), out_fmt, "ln")


def arcsin_sqrt_fp(v: FixedPoint, out_fmt: Format) -> FixedPoint:
    """arcsin(sqrt(v)) for v in [0, 1]."""
    if v.raw < 0 or v.raw > (1 << v.b2):
        raise DomainError("arcsin_sqrt needs v in [0, 1]")
    return _out(asin_sqrt_raw(v.raw, v.b2, out_fmt[1]), out_fmt, "arcsin_sqrt")


def sin_sq_fp(theta: FixedPoint, out_fmt: Format) -> FixedPoint:
    return _out(sin_sq_raw(theta.raw, theta.b2, out_fmt[1]), out_fmt, "sin_sq")


def sin_sq_pi_fp(beta: FixedPoint, out_fmt: Format) -> FixedPoint:
    """sin^2(pi * beta), which avoids rounding pi*beta before the sine."""
    return _out(sin_sq_raw(beta.raw, beta.b2, out_fmt[1], True), out_fmt, "sin_sq")


class FixedVector:
    """A vector of fixed-point numbers sharing one (b1, b2) format.

    Stored as a list of raw integers; indexing returns FixedPoint objects.
    """

    __slots__ = ("raw", "b1", "b2")

    def __init__(self, raw, b1: int, b2: int):
        self.raw = [int(v) for v in raw]
        self.b1 = b1
        self.b2 = b2
        lim = 1 << (b1 + b2)
        for v in self.raw:
            if abs(v) >= lim:
                raise FixedPointOverflow(f"raw {v} does not fit in ({b1},{b2})")

    @classmethod
    def zeros(cls, n: int, fmt: Format) -> "FixedVector":
        return cls([0] * n, *fmt)

    @classmethod
    def from_points(cls, pts) -> "FixedVector":
        pts = list(pts)
        if not pts:
            raise FormatError("empty vector")
        b1 = max(p.b1 for p in pts)
        b2 = max(p.b2 for p in pts)
        return cls([p.raw << (b2 - p.b2) for p in pts], b1, b2)

    @property
    def format(self) -> Format:
        return (self.b1, self.b2)

    def __len__(self):
        return len(self.raw)

    def __getitem__(self, i) -> FixedPoint:
        return FixedPoint(self.raw[i], self.b1, self.b2)

    def __iter__(self):
        return (FixedPoint(v, self.b1, self.b2) for v in self.raw)

    def __neg__(self) -> "FixedVector":
        return FixedVector([-v for v in self.raw], self.b1, self.b2)

    def __eq__(self, other):
        return isinstance(other, FixedVector) and self.format == other.format and self.raw == other.raw

    def copy(self) -> "FixedVector":
        return FixedVector(list(self.raw), self.b1, self.b2)

    def set(self, i: int, v: FixedPoint):
        """Store v (rounded to this vector's trailing bits) at position i."""
        raw = round_shift(v.raw, v.b2 - self.b2)
        self.raw[i] = _fit(raw, self.b1, self.b2)

    def floats(self):
        scale = float(1 << self.b2)
        return [v / scale for v in self.raw]

    def fractions(self):
        return [Fraction(v, 1 << self.b2) for v in self.raw]

    def strings(self):
        return [format_fixed(p) for p in self]

    def max_abs(self) -> Fraction:
        return Fraction(max((abs(v) for v in self.raw), default=0), 1 << self.b2)
