"""Closed-form monomial integrals over the unit sphere, exactly.

The surface integral of an even monomial x^a over S^{n-1} equals
2*Gamma(b_1)...Gamma(b_n)/Gamma(b_1+...+b_n) with b_j = (a_j + 1)/2, and
vanishes when any a_j is odd.  All Gamma arguments are half-integers, so
every value is an exact rational times an integer power of sqrt(pi); powers
of pi cancel in any ratio against the sphere area, leaving the normalized
moments and the averaged-trace-of-Hessian functional as exact rationals.

Integrals here are against the unnormalized surface measure (the constant 1
integrates to the sphere area); divide by :func:`sphere_area` for the
probability measure.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import factorial, pi
from typing import Sequence

from .poly import RATIONAL, Exponent, Polynomial, iter_exponents_up_to


@dataclass(frozen=True)
class PiValue:
    """An exact value coef * pi^(half_power/2)."""
    coef: Fraction
    half_power: int

    @property
    def float(self) -> float:
        return float(self.coef) * pi ** (self.half_power / 2)

    def __mul__(self, other: "PiValue") -> "PiValue":
        return PiValue(self.coef * other.coef, self.half_power + other.half_power)

    def __truediv__(self, other: "PiValue") -> "PiValue":
        if other.coef == 0:
            raise ZeroDivisionError
        return PiValue(self.coef / other.coef, self.half_power - other.half_power)

    @property
    def is_zero(self) -> bool:
        return self.coef == 0

    def as_rational(self) -> Fraction:
        if self.coef != 0 and self.half_power != 0:
            raise ValueError("value carries a residual power of pi")
        return self.coef

    def __str__(self) -> str:
        if self.coef == 0 or self.half_power == 0:
            return str(self.coef)
        if self.half_power % 2 == 0:
            power = self.half_power // 2
            return f"{self.coef}*pi^{power}" if power != 1 else f"{self.coef}*pi"
        return f"{self.coef}*pi^({self.half_power}/2)"


def gamma_half(two_x: int) -> PiValue:
    """Gamma(two_x / 2) for a positive integer two_x, exactly."""
    if two_x <= 0:
        raise ValueError("Gamma argument must be positive")
    if two_x % 2 == 0:
        return PiValue(Fraction(factorial(two_x // 2 - 1)), 0)
    k = (two_x - 1) // 2  # Gamma(k + 1/2) = (2k)! / (4^k k!) * sqrt(pi)
    return PiValue(Fraction(factorial(2 * k), 4 ** k * factorial(k)), 1)


def monomial_sphere_integral(alpha: Sequence[int], n: int | None = None) -> PiValue:
    """Integral of x^alpha over S^{n-1}, unnormalized surface measure."""
    alpha = tuple(int(a) for a in alpha)
    if n is None:
        n = len(alpha)
    if len(alpha) != n:
        raise ValueError(f"exponent has length {len(alpha)}, expected {n}")
    if any(a < 0 for a in alpha):
        raise ValueError("negative exponent")
    if any(a % 2 for a in alpha):
        return PiValue(Fraction(0), 0)
    value = PiValue(Fraction(2), 0)
    for a in alpha:
        value = value * gamma_half(a + 1)
    return value / gamma_half(sum(alpha) + n)


def sphere_area(n: int) -> PiValue:
    """Surface area of S^{n-1}: 2*pi^(n/2)/Gamma(n/2)."""
    if n < 1:
        raise ValueError("need n >= 1")
    return PiValue(Fraction(2), n) / gamma_half(n)


def normalized_monomial_integral(alpha: Sequence[int], n: int | None = None) -> Fraction:
    """Average of x^alpha over the sphere (probability measure); exact."""
    if n is None:
        n = len(alpha)
    raw = monomial_sphere_integral(alpha, n)
    if raw.is_zero:
        return Fraction(0)
    return (raw / sphere_area(n)).as_rational()


@dataclass(frozen=True)
class SphereFunctional:
    """Linear functional g -> average over the sphere of trace(Hessian(g)).

    Weights are exact rationals on the coefficients of g; only nonzero
    weights are stored (a weight survives only for all-even exponents with
    some entry >= 2).
    """
    n: int
    degree: int
    coeffs: dict  # Exponent -> Fraction

    def weight(self, exp: Exponent) -> Fraction:
        return self.coeffs.get(tuple(exp), Fraction(0))

    def apply(self, g: Polynomial):
        """Functional value on g; exact Fraction in rational mode."""
        if g.n != self.n:
            raise ValueError(f"polynomial in {g.n} variables, functional over {self.n}")
        total = Fraction(0) if g.mode == RATIONAL else 0.0
        for exp, coef in g.terms.items():
            w = self.coeffs.get(exp)
            if w is None:
                continue
            total += coef * (w if g.mode == RATIONAL else float(w))
        return total


def avg_trace_hessian_functional(n: int, degree: int) -> SphereFunctional:
    """Weights of the sphere-averaged Hessian trace on degree-<=degree polynomials."""
    if n < 1 or degree < 0:
        raise ValueError("need n >= 1 and degree >= 0")
    weights: dict[Exponent, Fraction] = {}
    for half in iter_exponents_up_to(n, degree // 2):
        alpha = tuple(2 * h for h in half)
        if sum(alpha) < 2:
            continue
        total = Fraction(0)
        for i in range(n):
            if alpha[i] < 2:
                continue
            shifted = list(alpha)
            shifted[i] -= 2
            total += alpha[i] * (alpha[i] - 1) * normalized_monomial_integral(shifted, n)
        if total != 0:
            weights[alpha] = total
    return SphereFunctional(n, degree, weights)
