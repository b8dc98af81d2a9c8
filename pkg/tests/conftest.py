import random
from fractions import Fraction

import numpy as np
import pytest

from dcpoly.poly import Polynomial, iter_exponents_up_to


def random_polynomial(rng: random.Random, n: int, degree: int,
                      density: float = 0.4, span: int = 6) -> Polynomial:
    """Sparse random rational polynomial for property tests."""
    terms = {}
    for exp in iter_exponents_up_to(n, degree):
        if rng.random() < density:
            c = rng.randint(-span, span)
            if c:
                terms[exp] = Fraction(c)
    if not terms:
        terms[tuple([0] * n)] = Fraction(1)
    return Polynomial(n, terms)


def random_rational_point(rng: random.Random, n: int, span: int = 3) -> tuple:
    return tuple(Fraction(rng.randint(-2 * span, 2 * span), rng.randint(1, span))
                 for _ in range(n))


@pytest.fixture
def rng():
    return random.Random(20240817)


@pytest.fixture
def np_rng():
    return np.random.default_rng(20240817)
