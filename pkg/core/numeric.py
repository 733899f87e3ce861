"""
Number layer: exact rationals where the inputs allow, floats otherwise.

Mechanism math runs on whatever it is given: Fractions stay Fractions through
+, -, *, / and max, so the worked examples (2/3 · 3.5 = 7/3) come out exact.
As soon as a float enters, Python promotes the result to float and every
comparison switches to an absolute tolerance.

    exact:  Fraction(7, 3) - Fraction(3, 2) == Fraction(5, 6)    → exact compare
    float:  7/3 - 1.5 ≈ 0.8333333                               → |a - b| ≤ 1e-9

Usage:
    x = parse_number("2/3")          # Fraction(2, 3)
    ge(x * Fraction(7, 2), 2)        # exact comparison
    display(Fraction(5, 6), 2)       # '0.83'
"""

from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Union

Number = Union[Fraction, float]

ABS_TOL = 1e-9


@dataclass(frozen=True)
class Tolerance:
    """Comparison tolerance for float mode. Exact mode ignores it."""
    abs: float = ABS_TOL


DEFAULT_TOL = Tolerance()


# ═══════════════════════════════════════════════════════════════
# Parsing / encoding
# ═══════════════════════════════════════════════════════════════

def parse_number(value) -> Number:
    """
    Turn a JSON value into a Number.

      7              → Fraction(7)
      "1.5", "2/3"   → Fraction (exact)
      {"num": 7, "den": 3} → Fraction(7, 3)
      0.1            → float (the JSON author chose binary floating point)
    """
    if isinstance(value, bool):
        raise TypeError(f"not a number: {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return value
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, dict) and set(value) == {"num", "den"}:
        return Fraction(int(value["num"]), int(value["den"]))
    raise TypeError(f"not a number: {value!r}")


def encode_number(x: Number):
    """Inverse of parse_number: ints stay ints, rationals become {num, den}."""
    if isinstance(x, Rational):
        x = Fraction(x)
        if x.denominator == 1:
            return x.numerator
        return {"num": x.numerator, "den": x.denominator}
    return float(x)


def is_exact(*values) -> bool:
    return all(isinstance(v, Rational) for v in values)


def as_float(x: Number) -> float:
    return float(x)


# ═══════════════════════════════════════════════════════════════
# Comparisons
# ═══════════════════════════════════════════════════════════════

def ge(a: Number, b: Number, tol: Tolerance = DEFAULT_TOL) -> bool:
    """a ≥ b, exact for rationals, a ≥ b − tol for floats."""
    if is_exact(a, b):
        return a >= b
    return float(a) >= float(b) - tol.abs


def gt(a: Number, b: Number, tol: Tolerance = DEFAULT_TOL) -> bool:
    """a > b strictly; in float mode the gap must exceed the tolerance."""
    if is_exact(a, b):
        return a > b
    return float(a) > float(b) + tol.abs


def eq(a: Number, b: Number, tol: Tolerance = DEFAULT_TOL) -> bool:
    if is_exact(a, b):
        return a == b
    return abs(float(a) - float(b)) <= tol.abs


def positive_part(x: Number) -> Number:
    """[x]₊ preserving the number type."""
    return x if x > 0 else type(x)(0)


def zero_like(x: Number) -> Number:
    """A zero of the same kind as x."""
    return x * 0


def total(values) -> Number:
    """Sum that starts from an exact zero so rationals stay rational."""
    acc: Number = Fraction(0)
    for v in values:
        acc = acc + v
    return acc


# ═══════════════════════════════════════════════════════════════
# Display
# ═══════════════════════════════════════════════════════════════

def display(x: Number, digits: int = 3) -> str:
    return f"{float(x):.{digits}f}"


def exact_str(x: Number) -> str:
    """'p/q' for rationals, repr-precision decimal for floats."""
    if isinstance(x, Rational):
        x = Fraction(x)
        return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
    return repr(float(x))
