"""Exact/real arithmetic helpers.

Quantities are either all ``Fraction`` (exact mode) or all ``float`` (real
mode). Helpers here keep the two paths on the same code.
"""
import math
from fractions import Fraction
from typing import Iterable, Union

Number = Union[float, Fraction]

REAL_TOL = 1e-12


def is_exact(*values: object) -> bool:
    """True when every value is a Fraction or an int."""
    return all(isinstance(v, (Fraction, int)) and not isinstance(v, bool) for v in values)


def tolerance(exact: bool) -> float:
    return 0.0 if exact else REAL_TOL


def as_number(value: object, exact: bool) -> Number:
    """Coerce to the requested mode; decimal strings stay exact."""
    if exact:
        if isinstance(value, float):
            return Fraction(repr(value))
        return Fraction(value)  # type: ignore[arg-type]
    return float(value)  # type: ignore[arg-type]


def ln(value: Number) -> float:
    return math.log(float(value))


def sqrt(value: Number) -> float:
    return math.sqrt(float(value))


def ceil_int(value: float) -> int:
    # Guards against 3.0000000000000004 style rounding pushing a ceiling up.
    nearest = round(value)
    if abs(value - nearest) < 1e-9:
        return int(nearest)
    return int(math.ceil(value))


def total(values: Iterable[Number]) -> Number:
    """Order-stable sum: exact for Fractions, fsum for floats."""
    values = list(values)
    if values and all(isinstance(v, Fraction) for v in values):
        return sum(values, Fraction(0))
    return math.fsum(float(v) for v in values)


def unit(exact: bool) -> tuple:
    """(zero, one) in the requested mode."""
    if exact:
        return Fraction(0), Fraction(1)
    return 0.0, 1.0


def bernoulli_kl(p: Number, q: Number) -> float:
    """d(p || q) between Bernoulli laws, with 0 * ln 0 = 0 and +inf on unsupported mass."""

    def term(a: float, b: float) -> float:
        if a <= 0:
            return 0.0
        if b <= 0:
            return math.inf
        return a * math.log(a / b)

    p, q = float(p), float(q)
    return max(0.0, term(p, q) + term(1 - p, 1 - q))
