"""Exact rational parsing and formatting.

Stability arithmetic is done entirely in `fractions.Fraction`; parameter
values never pass through floating point.  Problem files carry rationals
as strings ("3/4", "-2") or plain integers.
"""

from __future__ import annotations

from fractions import Fraction

from .errors import ProblemFileError


def parse_rational(value) -> Fraction:
    """Parse an exact rational from an int, a Fraction, or a 'p/q' string."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int) and not isinstance(value, bool):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ProblemFileError(f"bad rational literal {value!r}: {exc}") from None
    raise ProblemFileError(
        f"rationals must be integers or 'p/q' strings, got {type(value).__name__}"
    )


def format_rational(value: Fraction) -> str:
    """Canonical string form: 'p' for integers, otherwise 'p/q' in lowest terms."""
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"
