import math
from fractions import Fraction

import numpy as np
import pytest

from dcpoly.certify import ConvexityCone, GramCertificate, check_convexity
from dcpoly.poly import Polynomial
from dcpoly.sphere import (
    avg_trace_hessian_functional,
    gamma_half,
    monomial_sphere_integral,
    normalized_monomial_integral,
    sphere_area,
)

from conftest import random_polynomial


def mc_sphere_average(alpha, n, samples, np_rng):
    """Monte-Carlo average of x^alpha over the unit sphere."""
    g = np_rng.standard_normal((samples, n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    values = np.ones(samples)
    for i, a in enumerate(alpha):
        if a:
            values *= g[:, i] ** a
    return float(values.mean())


class TestGammaHalf:
    def test_integers(self):
        assert gamma_half(2).coef == 1      # Gamma(1)
        assert gamma_half(8).coef == 6      # Gamma(4) = 3!

    def test_half_integers(self):
        root_pi = gamma_half(1)
        assert root_pi.coef == 1 and root_pi.half_power == 1
        g32 = gamma_half(3)  # Gamma(3/2) = sqrt(pi)/2
        assert g32.coef == Fraction(1, 2) and g32.half_power == 1

    def test_nonpositive_rejected(self):
        with pytest.raises(ValueError):
            gamma_half(0)


class TestMonomialIntegral:
    def test_odd_exponent_vanishes(self):
        assert monomial_sphere_integral((1, 0)).is_zero
        assert monomial_sphere_integral((2, 3, 0)).is_zero

    def test_constant_integrates_to_area(self):
        for n in range(1, 7):
            total = monomial_sphere_integral((0,) * n)
            area = sphere_area(n)
            assert total.coef == area.coef and total.half_power == area.half_power

    def test_second_moment_is_one_over_n(self):
        for n in range(2, 7):
            alpha = (2,) + (0,) * (n - 1)
            assert normalized_monomial_integral(alpha) == Fraction(1, n)

    def test_mixed_fourth_moment(self):
        raw = monomial_sphere_integral((2, 2, 0))
        assert raw.coef == Fraction(4, 15) and raw.half_power == 2  # 4*pi/15
        assert normalized_monomial_integral((2, 2, 0)) == Fraction(1, 15)

    def test_monte_carlo_agreement(self, np_rng):
        # formula vs 10^6-sample Monte Carlo for random even monomials
        for _ in range(8):
            n = int(np_rng.integers(2, 6))
            alpha = tuple(2 * int(a) for a in np_rng.integers(0, 3, size=n))
            if sum(alpha) == 0 or sum(alpha) > 8:
                continue
            exact = float(normalized_monomial_integral(alpha, n))
            approx = mc_sphere_average(alpha, n, 1_000_000, np_rng)
            assert math.isclose(exact, approx, rel_tol=1e-2, abs_tol=1e-4)


class TestSphereArea:
    def test_circle(self):
        a = sphere_area(2)
        assert a.coef == 2 and a.half_power == 2
        assert math.isclose(a.float, 2 * math.pi)

    def test_two_sphere(self):
        a = sphere_area(3)
        assert a.coef == 4 and a.half_power == 2

    def test_three_sphere(self):
        a = sphere_area(4)
        assert a.coef == 2 and a.half_power == 4
        assert math.isclose(a.float, 2 * math.pi ** 2)


class TestTraceFunctional:
    def test_round_bowl_gives_two_n(self):
        for n in (2, 3, 4):
            functional = avg_trace_hessian_functional(n, 2)
            bowl = Polynomial(n, {tuple(2 * int(i == k) for i in range(n)): 1
                                  for k in range(n)})
            assert functional.apply(bowl) == 2 * n

    def test_pure_quartic(self):
        functional = avg_trace_hessian_functional(2, 4)
        assert functional.apply(Polynomial(2, {(4, 0): 1})) == 6

    def test_affine_is_zero(self):
        functional = avg_trace_hessian_functional(3, 4)
        affine = Polynomial(3, {(0, 0, 0): 5, (1, 0, 0): -2, (0, 0, 1): 7})
        assert functional.apply(affine) == 0

    def test_linearity_exact(self, rng):
        functional = avg_trace_hessian_functional(3, 4)
        for _ in range(20):
            g1 = random_polynomial(rng, 3, 4)
            g2 = random_polynomial(rng, 3, 4)
            lam = Fraction(rng.randint(-5, 5), rng.randint(1, 4))
            combo = g1 + g2.scale(lam)
            assert functional.apply(combo) == \
                functional.apply(g1) + lam * functional.apply(g2)

    def test_permutation_invariance(self, rng):
        functional = avg_trace_hessian_functional(3, 4)
        for _ in range(20):
            g = random_polynomial(rng, 3, 4)
            perm = [2, 0, 1]
            relabeled = Polynomial(3, {tuple(exp[perm[i]] for i in range(3)): c
                                       for exp, c in g.terms.items()})
            assert functional.apply(g) == functional.apply(relabeled)

    def test_nonnegative_on_certified_convex(self, rng):
        functional = avg_trace_hessian_functional(2, 4)
        count = 0
        while count < 6:
            q = random_polynomial(rng, 2, 1)
            candidate = (q * q) + (q * q).scale(Fraction(1, 3))
            cert = check_convexity(candidate, ConvexityCone.SOS)
            if not isinstance(cert, GramCertificate):
                continue
            assert functional.apply(candidate) >= 0
            count += 1

    def test_positive_on_convex_with_quadratic_terms(self):
        # a certified convex polynomial with zero functional must be affine;
        # equivalently any convex candidate with curvature scores positive
        functional = avg_trace_hessian_functional(2, 4)
        for p in (Polynomial(2, {(2, 0): 1}),
                  family_member_like(),
                  Polynomial(2, {(4, 0): 1, (0, 4): 1})):
            cert = check_convexity(p, ConvexityCone.SOS)
            assert isinstance(cert, GramCertificate)
            assert functional.apply(p) > 0

    def test_weights_only_on_even_exponents(self):
        functional = avg_trace_hessian_functional(3, 6)
        for exp in functional.coeffs:
            assert all(e % 2 == 0 for e in exp)
            assert sum(exp) >= 2


def family_member_like():
    return Polynomial(2, {(4, 0): 2, (0, 4): 2, (2, 2): 1})
