"""High-precision number helpers.

The iterated constructions shrink radii super-exponentially (log(1/r_n) roughly
quadruples per stage), so radii, twists and distortions leave the double range
after a handful of stages. All radial-map arithmetic is done with mpmath
floats, which carry an unbounded exponent, at a fixed working precision.
"""

from __future__ import annotations

import math
import numbers

import mpmath

DPS = 50

highprec = mpmath.workdps(DPS)

mpf = mpmath.mpf


def to_mpf(x) -> mpmath.mpf:
    """Convert ``x`` to an mpf at the working precision, rejecting NaN/Inf."""
    with mpmath.workdps(DPS):
        if isinstance(x, str):
            value = mpmath.mpf(x)
        elif isinstance(x, mpmath.mpf):
            value = +x
        elif isinstance(x, numbers.Real):
            value = mpmath.mpf(x)
        else:
            raise TypeError(f"expected a real number, got {type(x).__name__}")
    if not mpmath.isfinite(value):
        raise ValueError(f"non-finite value {x!r}")
    return value


def format_number(x) -> str:
    """Shortest decimal string that parses back to exactly ``x``.

    Python floats take their digits from ``repr``; mpf values are searched
    digit by digit at the working precision. Both are laid out the same way
    (positional for exponents -4..15, scientific otherwise), and the output is
    always a valid JSON number literal even when the exponent is far outside
    the double range.
    """
    if isinstance(x, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(x, numbers.Integral):
        return str(int(x))
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError(f"non-finite value {x!r}")
        return _layout(repr(x))
    with mpmath.workdps(DPS):
        value = mpmath.mpf(x)
        if not mpmath.isfinite(value):
            raise ValueError(f"non-finite value {x!r}")
        if value == 0:
            return "0.0"
        limit = mpmath.libmp.repr_dps(mpmath.mp.prec)
        for digits in range(1, limit + 1):
            text = mpmath.nstr(value, digits, min_fixed=1, max_fixed=0)
            if mpmath.mpf(text) == value:
                break
    return _layout(text)


def _layout(text: str) -> str:
    """Re-lay a decimal literal: positional for leading-digit exponents -4..15, else scientific."""
    sign = text.startswith("-")
    mantissa, _, exp = text.lstrip("+-").partition("e")
    whole, _, frac = mantissa.partition(".")
    digits = whole + frac
    point = len(whole) - 1 + (int(exp) if exp else 0)
    stripped = digits.lstrip("0")
    point -= len(digits) - len(stripped)
    digits = stripped.rstrip("0")
    if not digits:
        return "-0.0" if sign else "0.0"
    if -4 <= point < 16:
        if point >= 0:
            body = f"{digits[: point + 1].ljust(point + 1, '0')}.{digits[point + 1 :] or '0'}"
        else:
            body = "0." + "0" * (-point - 1) + digits
    else:
        body = f"{digits[0]}.{digits[1:] or '0'}e{point}"
    return ("-" if sign else "") + body


def parse_number(text: str) -> mpmath.mpf:
    with mpmath.workdps(DPS):
        return mpmath.mpf(text)


def to_float(x) -> float:
    """Float conversion that saturates instead of raising (huge mpf -> inf)."""
    try:
        return float(x)
    except OverflowError:
        return math.copysign(math.inf, float(mpmath.sign(x)))
