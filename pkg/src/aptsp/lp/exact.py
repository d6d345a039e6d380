"""Directed rational enclosures of exp(x) for exact certificate checking.

All enclosures are dyadic rationals ``m / 2**prec``, so sums of many of them
stay cheap in :class:`fractions.Fraction` arithmetic.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache

PREC = 160


def _ceil_div(a: int, b: int) -> int:
    return -((-a) // b)


def _exp_nonneg_scaled(num: int, den: int, work: int) -> tuple[int, int]:
    """Integers ``lo, hi`` with ``lo / 2**work <= exp(num/den) <= hi / 2**work``; num >= 0."""
    halvings = 0
    while 2 * num > den << halvings:  # reduce to y <= 1/2
        halvings += 1
    den_r = den << halvings
    one = 1 << work
    s_lo = s_hi = one
    t_lo = t_hi = one
    k = 0
    while t_hi > 1:
        k += 1
        t_lo = (t_lo * num) // (den_r * k)
        t_hi = _ceil_div(t_hi * num, den_r * k)
        s_lo += t_lo
        s_hi += t_hi
    # remaining tail is below the last term because y/(k+1) <= 1/2
    s_hi += t_hi
    for _ in range(halvings):
        s_lo = (s_lo * s_lo) >> work
        s_hi = _ceil_div(s_hi * s_hi, one)
    return s_lo, s_hi


@lru_cache(maxsize=None)
def exp_bounds(x: Fraction, prec: int = PREC) -> tuple[Fraction, Fraction]:
    """Dyadic ``(lo, hi)`` with ``lo <= exp(x) <= hi`` and relative width about ``2**-prec``."""
    x = Fraction(x)
    if x == 0:
        return Fraction(1), Fraction(1)
    mag = abs(x)
    # squaring loses about one bit per halving; size the guard accordingly
    work = prec + 2 * max(0, mag.numerator.bit_length() - mag.denominator.bit_length()) + 64
    lo, hi = _exp_nonneg_scaled(mag.numerator, mag.denominator, work)
    if x > 0:
        shift = work - prec
        scale = 1 << prec
        return Fraction(lo >> shift, scale), Fraction(_ceil_div(hi, 1 << shift), scale)
    # exp(-m) lies in [2**work / hi, 2**work / lo]; keep prec bits relative to its size
    bits = prec + hi.bit_length() - work
    scale = 1 << bits
    return (Fraction((scale << work) // hi, scale),
            Fraction(_ceil_div(scale << work, lo), scale))


def exp_lower(x) -> Fraction:
    return exp_bounds(Fraction(x))[0]


def exp_upper(x) -> Fraction:
    return exp_bounds(Fraction(x))[1]


def to_fraction(value) -> Fraction:
    """Exact rational from an int, float, Fraction, or ``"num/den"`` / decimal string."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, float):
        return Fraction(value)  # exact binary value
    return Fraction(value)


def fraction_str(q: Fraction) -> str:
    q = Fraction(q)
    return f"{q.numerator}/{q.denominator}"


def dyadic_floor(q: Fraction, bits: int = 64) -> Fraction:
    return Fraction((q.numerator << bits) // q.denominator, 1 << bits)
