"""Sparse multivariate polynomials with exact-rational or float coefficients.

A polynomial is a mapping from exponent tuples to coefficients.  Exponent
tuples always have length ``n`` (the ambient variable count) and nonnegative
entries; zero coefficients are never stored.  Two coefficient modes exist:
``"rational"`` (``fractions.Fraction``, exact) and ``"float"`` (float64).
Rational mode is used wherever identities must hold exactly; float mode is
the currency of the conic-solver boundary.

Variables are positional: x_1..x_n.  The quadratic-in-y Hessian form
``y^T H_p(x) y`` lives in 2n variables with the y block at indices n..2n-1.
"""

from __future__ import annotations

import json
from fractions import Fraction
from typing import Iterable, Mapping, Sequence, Union

Exponent = tuple  # tuple[int, ...], length n, entries >= 0
Coefficient = Union[Fraction, float]

RATIONAL = "rational"
FLOAT = "float"


def grlex_key(exp: Exponent):
    """Graded lexicographic sort key: total degree first, then x_1-major."""
    return (sum(exp), tuple(-e for e in exp))


def iter_exponents(n: int, d: int):
    """All exponent tuples of total degree exactly d, in graded-lex order."""
    if n == 1:
        yield (d,)
        return
    for first in range(d, -1, -1):
        for rest in iter_exponents(n - 1, d - first):
            yield (first,) + rest


def iter_exponents_up_to(n: int, d: int):
    """All exponent tuples of total degree <= d, degree-ascending graded-lex."""
    for k in range(d + 1):
        yield from iter_exponents(n, k)


def _coerce(value, mode: str):
    if mode == RATIONAL:
        if isinstance(value, float):
            return Fraction(value)  # exact binary expansion
        return Fraction(value)
    return float(value)


class Polynomial:
    """Immutable sparse polynomial in n variables.

    ``ambient_degree`` is declared metadata: it may exceed the actual degree
    (after padding an odd-degree polynomial into the next even-degree space)
    but never undercuts it.
    """

    __slots__ = ("n", "terms", "mode", "_ambient")

    def __init__(self, n: int, terms: Mapping[Exponent, Coefficient],
                 mode: str = RATIONAL, ambient_degree: int | None = None):
        if n < 0:
            raise ValueError("variable count must be nonnegative")
        if mode not in (RATIONAL, FLOAT):
            raise ValueError(f"unknown coefficient mode {mode!r}")
        clean: dict[Exponent, Coefficient] = {}
        for exp, coef in terms.items():
            exp = tuple(exp)
            if len(exp) != n:
                raise ValueError(f"exponent {exp} has length {len(exp)}, expected {n}")
            if any(e < 0 for e in exp):
                raise ValueError(f"negative exponent in {exp}")
            c = _coerce(coef, mode)
            if c != 0:
                clean[exp] = clean.get(exp, _coerce(0, mode)) + c
                if clean[exp] == 0:
                    del clean[exp]
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "terms", clean)
        object.__setattr__(self, "mode", mode)
        deg = max((sum(e) for e in clean), default=0)
        if ambient_degree is None:
            ambient_degree = deg
        elif ambient_degree < deg:
            raise ValueError(f"ambient degree {ambient_degree} below actual degree {deg}")
        object.__setattr__(self, "_ambient", ambient_degree)

    def __setattr__(self, *_):
        raise AttributeError("Polynomial is immutable")

    # ---------------------------------------------------------------- basics

    @property
    def degree(self) -> int:
        """Max total degree of stored terms (0 for the zero polynomial)."""
        return max((sum(e) for e in self.terms), default=0)

    @property
    def ambient_degree(self) -> int:
        return self._ambient

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def is_form(self) -> bool:
        """True if all terms share the same (positive) total degree."""
        degs = {sum(e) for e in self.terms}
        return len(degs) == 1 and degs != {0}

    @classmethod
    def zero(cls, n: int, mode: str = RATIONAL) -> "Polynomial":
        return cls(n, {}, mode)

    @classmethod
    def constant(cls, n: int, value, mode: str = RATIONAL) -> "Polynomial":
        return cls(n, {tuple([0] * n): value}, mode)

    @classmethod
    def monomial(cls, n: int, exp: Sequence[int], coef=1, mode: str = RATIONAL) -> "Polynomial":
        return cls(n, {tuple(exp): coef}, mode)

    @classmethod
    def variable(cls, n: int, i: int, mode: str = RATIONAL) -> "Polynomial":
        exp = [0] * n
        exp[i] = 1
        return cls(n, {tuple(exp): 1}, mode)

    def coefficient(self, exp: Sequence[int]) -> Coefficient:
        return self.terms.get(tuple(exp), _coerce(0, self.mode))

    def with_ambient_degree(self, degree: int) -> "Polynomial":
        return Polynomial(self.n, self.terms, self.mode, ambient_degree=degree)

    def to_float(self) -> "Polynomial":
        if self.mode == FLOAT:
            return self
        return Polynomial(self.n, {e: float(c) for e, c in self.terms.items()},
                          FLOAT, self._ambient)

    def to_rational(self) -> "Polynomial":
        """Exact conversion: floats map to their exact binary rational."""
        if self.mode == RATIONAL:
            return self
        return Polynomial(self.n, {e: Fraction(c) for e, c in self.terms.items()},
                          RATIONAL, self._ambient)

    # ------------------------------------------------------------ arithmetic

    def _check_compatible(self, other: "Polynomial"):
        if self.n != other.n:
            raise ValueError(f"variable count mismatch: {self.n} vs {other.n}")
        if self.mode != other.mode:
            raise ValueError(f"coefficient mode mismatch: {self.mode} vs {other.mode}")

    def __add__(self, other: "Polynomial") -> "Polynomial":
        self._check_compatible(other)
        out = dict(self.terms)
        zero = _coerce(0, self.mode)
        for exp, c in other.terms.items():
            s = out.get(exp, zero) + c
            if s == 0:
                out.pop(exp, None)
            else:
                out[exp] = s
        return Polynomial(self.n, out, self.mode,
                          max(self._ambient, other._ambient,
                              max((sum(e) for e in out), default=0)))

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + (-other)

    def __neg__(self) -> "Polynomial":
        return Polynomial(self.n, {e: -c for e, c in self.terms.items()},
                          self.mode, self._ambient)

    def scale(self, factor) -> "Polynomial":
        f = _coerce(factor, self.mode)
        if f == 0:
            return Polynomial.zero(self.n, self.mode)
        return Polynomial(self.n, {e: c * f for e, c in self.terms.items()},
                          self.mode, self._ambient)

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        self._check_compatible(other)
        out: dict[Exponent, Coefficient] = {}
        zero = _coerce(0, self.mode)
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                exp = tuple(a + b for a, b in zip(e1, e2))
                s = out.get(exp, zero) + c1 * c2
                if s == 0:
                    out.pop(exp, None)
                else:
                    out[exp] = s
        return Polynomial(self.n, out, self.mode)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.n == other.n and self.terms == other.terms

    def __hash__(self):
        return hash((self.n, frozenset(self.terms.items())))

    def __repr__(self):
        if not self.terms:
            return f"Polynomial({self.n}, 0)"
        parts = []
        for exp in sorted(self.terms, key=grlex_key):
            mono = "*".join(f"x{i + 1}^{e}" for i, e in enumerate(exp) if e)
            parts.append(f"{self.terms[exp]}{'*' + mono if mono else ''}")
        return f"Polynomial({self.n}, {' + '.join(parts)})"

    # --------------------------------------------------------------- calculus

    def eval(self, point: Sequence) -> Coefficient:
        """Evaluate at a point; rational points keep the result exact."""
        if len(point) != self.n:
            raise ValueError(f"point has length {len(point)}, expected {self.n}")
        total = None
        for exp, coef in self.terms.items():
            value = coef
            for x, e in zip(point, exp):
                if e:
                    value = value * x ** e
            total = value if total is None else total + value
        if total is None:
            return _coerce(0, self.mode)
        return total

    def gradient(self) -> list["Polynomial"]:
        return [self.partial(i) for i in range(self.n)]

    def partial(self, i: int) -> "Polynomial":
        out = {}
        for exp, coef in self.terms.items():
            if exp[i] == 0:
                continue
            new = list(exp)
            new[i] -= 1
            out[tuple(new)] = coef * exp[i]
        return Polynomial(self.n, out, self.mode)

    def hessian(self) -> "PolynomialMatrix":
        entries = [[None] * self.n for _ in range(self.n)]
        for i in range(self.n):
            pi = self.partial(i)
            for j in range(i, self.n):
                entries[i][j] = entries[j][i] = pi.partial(j)
        return PolynomialMatrix(entries)

    def hessian_form(self) -> "Polynomial":
        """Return y^T H_p(x) y as a polynomial in 2n variables.

        The x block keeps indices 0..n-1; y_i sits at index n+i.
        """
        n = self.n
        out: dict[Exponent, Coefficient] = {}
        zero = _coerce(0, self.mode)
        for exp, coef in self.terms.items():
            for i in range(n):
                if exp[i] == 0:
                    continue
                for j in range(i, n):
                    if i == j:
                        c = coef * exp[i] * (exp[i] - 1)
                        if c == 0:
                            continue
                    else:
                        if exp[j] == 0:
                            continue
                        c = 2 * coef * exp[i] * exp[j]
                    new = list(exp) + [0] * n
                    new[i] -= 1
                    new[j] -= 1
                    new[n + i] += 1
                    new[n + j] += 1
                    key = tuple(new)
                    s = out.get(key, zero) + c
                    if s == 0:
                        out.pop(key, None)
                    else:
                        out[key] = s
        return Polynomial(2 * n, out, self.mode)

    def pad_to_even_degree(self) -> "Polynomial":
        """Round the declared ambient degree up to the next even integer."""
        deg = max(self.degree, self._ambient)
        return self.with_ambient_degree(deg + (deg % 2))

    def eval_hessian(self, point: Sequence) -> list[list]:
        """Numeric Hessian matrix at a point (list of rows)."""
        return self.hessian().eval(point)

    # ------------------------------------------------------------- wire form

    def to_json_dict(self) -> dict:
        """Canonical wire form: grlex-sorted terms, reduced rationals."""
        terms = []
        for exp in sorted(self.terms, key=grlex_key):
            c = self.terms[exp]
            coef = f"{c.numerator}/{c.denominator}" if self.mode == RATIONAL else float(c)
            terms.append({"exp": list(exp), "coef": coef})
        return {"n": self.n, "degree": self.ambient_degree, "mode": self.mode,
                "terms": terms}

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "Polynomial":
        try:
            n = int(data["n"])
            mode = data["mode"]
            degree = int(data["degree"])
            terms = {}
            for item in data["terms"]:
                exp = tuple(int(e) for e in item["exp"])
                raw = item["coef"]
                if mode == RATIONAL:
                    coef = Fraction(raw) if isinstance(raw, str) else Fraction(raw)
                else:
                    coef = float(raw)
                terms[exp] = terms.get(exp, 0) + coef
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed polynomial JSON: {exc}") from exc
        return cls(n, terms, mode, ambient_degree=degree)

    @classmethod
    def from_json(cls, text: str) -> "Polynomial":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValueError(f"malformed polynomial JSON: {exc}") from exc
        return cls.from_json_dict(data)


class PolynomialMatrix:
    """Symmetric matrix of polynomials (the Hessian carrier)."""

    __slots__ = ("dim", "entries")

    def __init__(self, entries: Sequence[Sequence[Polynomial]]):
        dim = len(entries)
        for i in range(dim):
            if len(entries[i]) != dim:
                raise ValueError("entries must form a square grid")
            for j in range(i + 1, dim):
                if entries[i][j] != entries[j][i]:
                    raise ValueError(f"entries ({i},{j}) and ({j},{i}) differ")
        object.__setattr__(self, "dim", dim)
        object.__setattr__(self, "entries", tuple(tuple(row) for row in entries))

    def __setattr__(self, *_):
        raise AttributeError("PolynomialMatrix is immutable")

    def __getitem__(self, idx):
        i, j = idx
        return self.entries[i][j]

    def eval(self, point: Sequence) -> list[list]:
        return [[self.entries[i][j].eval(point) for j in range(self.dim)]
                for i in range(self.dim)]

    def trace_polynomial(self) -> Polynomial:
        total = self.entries[0][0]
        for i in range(1, self.dim):
            total = total + self.entries[i][i]
        return total


def parse_point(values: Iterable, n: int, exact: bool = False) -> tuple:
    """Validate a length-n point; optionally coerce to exact rationals."""
    point = tuple(Fraction(v) if exact else float(v) for v in values)
    if len(point) != n:
        raise ValueError(f"point has length {len(point)}, expected {n}")
    return point
