"""Double-double ("ExtReal") arithmetic.

A value is carried as an unevaluated pair ``hi + lo`` with ``|lo| <= ulp(hi)/2``,
giving roughly 32 significant digits.  Only the handful of operations needed by
the series kernels and the table builder are provided.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

_SPLIT = 134217729.0  # 2**27 + 1


def two_sum(a: float, b: float) -> tuple[float, float]:
    s = a + b
    bb = s - a
    err = (a - (s - bb)) + (b - bb)
    return s, err


def quick_two_sum(a: float, b: float) -> tuple[float, float]:
    # requires |a| >= |b|
    s = a + b
    return s, b - (s - a)


def _split(a: float) -> tuple[float, float]:
    t = _SPLIT * a
    hi = t - (t - a)
    return hi, a - hi


def two_prod(a: float, b: float) -> tuple[float, float]:
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    err = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, err


@dataclass(frozen=True, slots=True)
class ExtReal:
    """Double-double number ``hi + lo``."""

    hi: float
    lo: float = 0.0

    @classmethod
    def of(cls, x: float | ExtReal) -> ExtReal:
        return x if isinstance(x, ExtReal) else cls(float(x), 0.0)

    def __float__(self) -> float:
        return self.hi + self.lo

    def __neg__(self) -> ExtReal:
        return ExtReal(-self.hi, -self.lo)

    def __add__(self, other: float | ExtReal) -> ExtReal:
        o = ExtReal.of(other)
        s, e = two_sum(self.hi, o.hi)
        t, f = two_sum(self.lo, o.lo)
        e += t
        s, e = quick_two_sum(s, e)
        e += f
        return ExtReal(*quick_two_sum(s, e))

    __radd__ = __add__

    def __sub__(self, other: float | ExtReal) -> ExtReal:
        return self + (-ExtReal.of(other))

    def __rsub__(self, other: float | ExtReal) -> ExtReal:
        return ExtReal.of(other) + (-self)

    def __mul__(self, other: float | ExtReal) -> ExtReal:
        o = ExtReal.of(other)
        p, e = two_prod(self.hi, o.hi)
        e += self.hi * o.lo + self.lo * o.hi
        return ExtReal(*quick_two_sum(p, e))

    __rmul__ = __mul__

    def __truediv__(self, other: float | ExtReal) -> ExtReal:
        o = ExtReal.of(other)
        q1 = self.hi / o.hi
        r = self - o * q1
        q2 = r.hi / o.hi
        r = r - o * q2
        q3 = r.hi / o.hi
        s, e = quick_two_sum(q1, q2)
        return ExtReal(s, e) + q3

    def __rtruediv__(self, other: float | ExtReal) -> ExtReal:
        return ExtReal.of(other) / self

    def __lt__(self, other: float | ExtReal) -> bool:
        o = ExtReal.of(other)
        return self.hi < o.hi or (self.hi == o.hi and self.lo < o.lo)

    def __gt__(self, other: float | ExtReal) -> bool:
        return ExtReal.of(other) < self

    def __abs__(self) -> ExtReal:
        return -self if self.hi < 0.0 else self

    def sqrt(self) -> ExtReal:
        if self.hi <= 0.0:
            if self.hi == 0.0:
                return ExtReal(0.0)
            raise ValueError("sqrt of negative ExtReal")
        x = math.sqrt(self.hi)
        # one Newton correction in extended precision
        return ExtReal(*two_sum(x, float(self - ExtReal(*two_prod(x, x))) / (2.0 * x)))


def ext_sum(values) -> ExtReal:
    """Compensated sum of floats or ExtReals in the given order."""
    acc = ExtReal(0.0)
    for v in values:
        acc = acc + v
    return acc


def ext_dot(a, b) -> float:
    """Dot product accumulated in double-double, rounded once at the end."""
    hi = 0.0
    lo = 0.0
    for x, y in zip(a, b):
        p, e = two_prod(float(x), float(y))
        s, f = two_sum(hi, p)
        lo += e + f
        hi = s
    return hi + lo
