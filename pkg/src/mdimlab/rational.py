"""Exact rational arithmetic helpers.

All coordinates in this package are ``fractions.Fraction`` values (reduced,
positive denominator — the stdlib maintains the canonical form for us).
Floating point appears only in reports.  This module adds the few integer
kernels the stdlib lacks: floor k-th roots, floor rational powers, and the
text form ``p/q`` used by every file format.
"""
from __future__ import annotations

from fractions import Fraction

from .errors import DomainError, SerializationError

Rational = Fraction  # canonical exactness carrier for the whole package


# --- integer kernels -------------------------------------------------------

def iroot(n: int, k: int) -> int:
    """Floor k-th root of a nonnegative integer, by Newton iteration."""
    if n < 0 or k < 1:
        raise DomainError(f"iroot needs n >= 0 and k >= 1, got n={n}, k={k}")
    if n == 0 or k == 1:
        return n
    # start above the root, then Newton steps descend onto floor(n^(1/k))
    if n.bit_length() < 900:
        r = max(int(round(n ** (1.0 / k))), 1)
    else:
        r = 1 << (n.bit_length() // k + 1)
    while True:
        if r**k <= n < (r + 1) ** k:
            return r
        r = max(((k - 1) * r + n // r ** (k - 1)) // k, 1)


def floor_pow(x: Fraction, exponent: Fraction) -> int:
    """Exact floor(x**exponent) for x > 0 and rational exponent >= 0.

    Uses only integer arithmetic: with exponent p/q the answer is the unique
    m with m**q * den(x)**p <= num(x)**p < (m+1)**q * den(x)**p.
    """
    if x <= 0:
        raise DomainError(f"floor_pow needs x > 0, got {x}")
    p, q = exponent.numerator, exponent.denominator
    if p < 0:
        raise DomainError(f"floor_pow needs exponent >= 0, got {exponent}")
    if p == 0:
        return 1
    big_n, big_d = x.numerator**p, x.denominator**p
    r = iroot(big_n // big_d, q)
    while (r + 1) ** q * big_d <= big_n:
        r += 1
    while r > 0 and r**q * big_d > big_n:
        r -= 1
    return r


# --- text form --------------------------------------------------------------

def parse_rational(text: str) -> Fraction:
    """Parse ``p/q`` or a plain integer literal into a Fraction."""
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise SerializationError(f"not a rational literal: {text!r}") from exc


def format_rational(x: Fraction) -> str:
    """Render a Fraction as ``p/q`` (always with the slash, for round-trips)."""
    return f"{x.numerator}/{x.denominator}"


def parse_interval(text: str) -> tuple[Fraction, Fraction]:
    """Parse ``lo:hi`` into an ordered rational pair."""
    parts = text.split(":")
    if len(parts) != 2:
        raise SerializationError(f"not an interval literal lo:hi: {text!r}")
    lo, hi = parse_rational(parts[0]), parse_rational(parts[1])
    if lo > hi:
        raise SerializationError(f"interval endpoints out of order: {text!r}")
    return lo, hi


def format_interval(lo: Fraction, hi: Fraction) -> str:
    return f"{format_rational(lo)}:{format_rational(hi)}"
