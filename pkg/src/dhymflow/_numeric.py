"""Scalar helpers shared by the algebraic modules.

Quantities are either exact (:class:`fractions.Fraction`) or plain floats.
Integers, fractions and numeric strings such as ``"5328/2863"`` or ``"2.5"``
become fractions; floats stay floats.  Arithmetic between the two falls back
to floats, so exactness survives only when every input is exact.
"""

from __future__ import annotations

import math
from fractions import Fraction
from numbers import Rational
from typing import NamedTuple, Union

Number = Union[Fraction, float]


def as_number(value) -> Number:
    """Coerce ``value`` to a Fraction when it is rational-representable, else float."""
    if isinstance(value, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, Rational):
        return Fraction(int(value.numerator), int(value.denominator))
    if isinstance(value, str):
        text = value.strip()
        try:
            return Fraction(text)
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"cannot parse number {value!r}") from exc
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"non-finite value {value!r}")
        return value
    return float(value)


def is_exact(*values) -> bool:
    return all(isinstance(v, Fraction) for v in values)


def to_float(value) -> float:
    return float(value)


def format_number(value) -> str:
    """Render exact values as ``a/b`` and floats with 17 significant digits."""
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, int):
        return str(value)
    return format(float(value), ".17g")


def sqrt(value) -> float:
    return math.sqrt(float(value))


class Gaussian(NamedTuple):
    """Complex number with exact or float parts; ``complex(z)`` converts."""

    re: Number
    im: Number

    def __mul__(self, other: "Gaussian") -> "Gaussian":  # type: ignore[override]
        return Gaussian(self.re * other.re - self.im * other.im,
                        self.re * other.im + self.im * other.re)

    def __add__(self, other: "Gaussian") -> "Gaussian":  # type: ignore[override]
        return Gaussian(self.re + other.re, self.im + other.im)

    def __sub__(self, other: "Gaussian") -> "Gaussian":
        return Gaussian(self.re - other.re, self.im - other.im)

    def __neg__(self) -> "Gaussian":
        return Gaussian(-self.re, -self.im)

    def __complex__(self) -> complex:
        return complex(float(self.re), float(self.im))

    def conjugate(self) -> "Gaussian":
        return Gaussian(self.re, -self.im)

    def __pow__(self, k: int) -> "Gaussian":  # type: ignore[override]
        if k < 0:
            raise ValueError("negative powers are not supported")
        one = Fraction(1) if is_exact(self.re, self.im) else 1.0
        out = Gaussian(one, 0 * one)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out


def gaussian(re, im) -> Gaussian:
    return Gaussian(as_number(re), as_number(im))
