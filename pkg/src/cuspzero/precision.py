"""Helpers for gmpy2 working-precision management.

All high-precision arithmetic in this package runs under an explicit gmpy2 context;
nothing relies on the ambient global precision.  Contexts are cheap, so callers wrap
each logical computation in ``with bits(p):``.
"""

import math

import gmpy2
from gmpy2 import mpfr

DEFAULT_PRECISION = 192
ESCALATED_PRECISION = 384

# extra mantissa bits carried internally so results are good to the advertised precision
GUARD_BITS = 32


def bits(precision):
    """Context manager setting the mpfr working precision to `precision` bits."""
    return gmpy2.context(precision=precision)


def to_mpfr(x, precision):
    """Convert exactly-representable input to an mpfr at the given precision."""
    with bits(precision):
        return mpfr(x)


def decimal_digits(precision_bits):
    """Decimal digits that round-trip a binary `precision_bits` mantissa."""
    return int(math.ceil(precision_bits * math.log10(2.0))) + 2


def mpfr_to_str(x, precision_bits):
    """Serialize an mpfr with enough digits for exact binary round-trip.

    Scientific form d.ddd...e[+-]xx built from mpfr digits() because this gmpy2
    build mishandles __format__ for mpfr.
    """
    nd = decimal_digits(precision_bits)
    if x == 0:
        return "0." + "0" * nd + "e+00"
    s, e, _ = x.digits(10, nd + 1)
    sign = ""
    if s.startswith("-"):
        sign, s = "-", s[1:]
    return f"{sign}{s[0]}.{s[1:]}e{e - 1:+03d}"


def frac(x):
    """Fractional part of an mpfr in [0, 1)."""
    return x - gmpy2.floor(x)
