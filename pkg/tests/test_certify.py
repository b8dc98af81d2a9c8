import math
from fractions import Fraction

import numpy as np
import pytest

from dcpoly.certify import (
    ConvexityCone,
    GramCertificate,
    Infeasible,
    LinearPoly,
    StructuralInfeasibilityError,
    build_basis,
    check_convexity,
    check_membership,
    exactify,
    expand_gram,
    family_member,
    gram_equalities,
    quadratic_dcd_check,
    rational_psd_check,
    scan_csv,
    scan_parametric_family,
    tensor_basis,
)
from dcpoly.conic import ConicProgram, SolveStatus, solve
from dcpoly.poly import FLOAT, Polynomial

from conftest import random_polynomial


class TestBases:
    def test_two_variable_linear_exact(self):
        basis = build_basis(2, 1, homogeneous=True)
        assert basis.monomials == ((1, 0), (0, 1))

    def test_up_to_degree_two(self):
        assert len(build_basis(2, 2, homogeneous=False)) == 6

    def test_three_variable_quadratic_exact(self):
        assert len(build_basis(3, 2, homogeneous=True)) == 6

    def test_cardinalities_match_binomials(self):
        for n in range(1, 7):
            for d in range(0, 7):
                assert len(build_basis(n, d, False)) == math.comb(n + d, d)
                assert len(build_basis(n, d, True)) == math.comb(n + d - 1, d)

    def test_graded_lex_no_duplicates(self):
        basis = build_basis(3, 3, homogeneous=False)
        assert len(set(basis.monomials)) == len(basis.monomials)
        degrees = [sum(m) for m in basis.monomials]
        assert degrees == sorted(degrees)

    def test_tensor_basis_is_y_major(self):
        tb = tensor_basis(2, 1, homogeneous=True)
        assert tb.pairs == ((0, (1, 0)), (0, (0, 1)), (1, (1, 0)), (1, (0, 1)))
        assert tb.element_exponent(2) == (1, 0, 0, 1)

    def test_tensor_basis_length(self):
        tb = tensor_basis(3, 2, homogeneous=False)
        assert len(tb.pairs) == 3 * len(build_basis(3, 2, False))


class TestGramEqualities:
    def test_single_square_pins_diagonal(self):
        # target 2*y1^2 over the basis (y1) forces Q11 == 2
        prog = ConicProgram()
        basis = tensor_basis(1, 0, homogeneous=False)
        Q = prog.new_symmat(1)
        target = Polynomial(2, {(0, 2): 2.0}, FLOAT)
        gram_equalities(target, basis, Q, prog)
        assert prog.equalities == [({Q[0, 0].id: 1.0}, 2.0)]

    def test_diagonal_quartic_expansion(self):
        prog = ConicProgram()
        basis = tensor_basis(2, 1, homogeneous=True)
        Q = prog.new_symmat(4)
        target = Polynomial(4, {(2, 0, 2, 0): 24.0, (0, 2, 0, 2): 24.0}, FLOAT)
        gram_equalities(target, basis, Q, prog)
        prog.set_objective({})
        sol = solve(prog)
        assert sol.status == SolveStatus.OPTIMAL
        recon = expand_gram(basis, sol.symmat_values(Q), rational=False)
        for exp, coef in target.terms.items():
            assert abs(recon.terms.get(exp, 0.0) - coef) <= 1e-6

    def test_cross_term_splits_over_two_entries(self):
        # 8*x1*x2*y1*y2 over w_{2,1}: the two off-diagonal slots share it
        prog = ConicProgram()
        basis = tensor_basis(2, 1, homogeneous=True)
        Q = prog.new_symmat(4)
        target = Polynomial(4, {(1, 1, 1, 1): 8.0}, FLOAT)
        gram_equalities(target, basis, Q, prog)
        row = next(r for r, rhs in prog.equalities if rhs == 8.0)
        assert sorted(row.values()) == [2.0, 2.0]

    def test_unrepresentable_monomial_raises(self):
        prog = ConicProgram()
        basis = build_basis(1, 1, homogeneous=True)  # only x1
        Q = prog.new_symmat(1)
        with pytest.raises(StructuralInfeasibilityError):
            gram_equalities(Polynomial(1, {(1,): 1.0}, FLOAT), basis, Q, prog)

    def test_parametric_coefficient_pinned_when_unrepresentable(self):
        prog = ConicProgram()
        basis = build_basis(1, 1, homogeneous=True)
        Q = prog.new_symmat(1)
        v = prog.new_var()
        target = LinearPoly(1)
        target.add_scaled_var(v, Polynomial(1, {(1,): 1.0}, FLOAT))
        gram_equalities(target, basis, Q, prog)
        assert ({v.id: 1.0}, -0.0) in [(r, rhs) for r, rhs in prog.equalities] or \
               ({v.id: 1.0}, 0.0) in [(r, rhs) for r, rhs in prog.equalities]


class TestMembership:
    def test_round_bowl_is_dsos(self):
        p = Polynomial(2, {(2, 0): 1, (0, 2): 1})
        cert = check_membership(p, ConvexityCone.DSOS)
        assert isinstance(cert, GramCertificate)
        assert np.allclose(cert.Q, np.eye(2), atol=1e-6)

    def test_indefinite_fails_every_level(self):
        p = Polynomial(2, {(2, 0): 1, (0, 2): -1})
        for cone in ConvexityCone:
            assert isinstance(check_membership(p, cone), Infeasible)

    def test_perfect_square_gram(self):
        p = Polynomial(2, {(2, 0): 1, (1, 1): 2, (0, 2): 1})
        cert = check_membership(p, ConvexityCone.DSOS)
        assert isinstance(cert, GramCertificate)
        assert np.allclose(cert.Q, np.ones((2, 2)), atol=1e-6)

    def test_certificate_chain_up_the_cones(self, rng):
        # anything certified dsos is certified sdsos and sos
        for _ in range(10):
            q = random_polynomial(rng, 2, 2)
            p = (q * q).to_float()
            levels = {cone: check_membership(p, cone) for cone in ConvexityCone}
            if isinstance(levels[ConvexityCone.DSOS], GramCertificate):
                assert isinstance(levels[ConvexityCone.SDSOS], GramCertificate)
                assert isinstance(levels[ConvexityCone.SOS], GramCertificate)

    def test_odd_degree_rejected(self):
        with pytest.raises(ValueError):
            check_membership(Polynomial(1, {(3,): 1}), ConvexityCone.SOS)

    def test_certified_sos_is_nonnegative_on_samples(self, rng, np_rng):
        hits = 0
        while hits < 5:
            q = random_polynomial(rng, 2, 2)
            r = random_polynomial(rng, 2, 2)
            p = (q * q + r * r).to_float()
            cert = check_membership(p, ConvexityCone.SOS)
            assert isinstance(cert, GramCertificate)
            xs = np_rng.uniform(-2, 2, size=(10_000, 2))
            for x in xs:
                assert p.eval(list(x)) >= -1e-6
            hits += 1

    def test_reconstruction_error_bound(self, rng):
        certified = 0
        for _ in range(8):
            q = random_polynomial(rng, 2, 2)
            p = (q * q).to_float()
            for cone in ConvexityCone:
                cert = check_membership(p, cone)
                if cone == ConvexityCone.SOS:
                    assert isinstance(cert, GramCertificate)
                if isinstance(cert, GramCertificate):
                    assert cert.verify(rtol=1e-6)
                    certified += 1
        assert certified >= 8


class TestConvexityChecks:
    def test_round_bowl_all_levels(self):
        p = Polynomial(3, {(2, 0, 0): 1, (0, 2, 0): 1, (0, 0, 2): 1})
        for cone in ConvexityCone:
            cert = check_convexity(p, cone)
            assert isinstance(cert, GramCertificate)

    def test_diagonal_quartic_dsos_convex(self):
        cert = check_convexity(family_member(0, 0, 0), ConvexityCone.DSOS)
        assert isinstance(cert, GramCertificate)

    def test_saddle_quartic_not_sos_convex(self):
        p = Polynomial(2, {(4, 0): 1, (2, 2): -6, (0, 4): 1})
        assert isinstance(check_convexity(p, ConvexityCone.SOS), Infeasible)

    def test_convexity_soundness_via_hessian_samples(self, np_rng):
        p = family_member(1, 2, 0)
        cert = check_convexity(p, ConvexityCone.SOS)
        assert isinstance(cert, GramCertificate)
        H = p.to_float().hessian()
        for x in np_rng.uniform(-3, 3, size=(1000, 2)):
            eigmin = np.linalg.eigvalsh(np.array(H.eval(list(x)), float)).min()
            assert eigmin >= -1e-6


class TestExactify:
    def test_dd_certificate_rounds_exact(self):
        p = Polynomial(2, {(2, 0): 1, (1, 1): 1, (0, 2): 1})
        cert = check_membership(p, ConvexityCone.DSOS)
        assert isinstance(cert, GramCertificate)
        exact = exactify(cert, p)
        assert exact is not None
        assert exact.reconstruct() == p
        assert exact.margin >= 0

    def test_psd_certificate_rounds_exact(self):
        p = Polynomial(2, {(2, 0): 2, (1, 1): 2, (0, 2): 2})
        cert = check_membership(p, ConvexityCone.SOS)
        assert isinstance(cert, GramCertificate)
        exact = exactify(cert, p)
        assert exact is not None
        assert exact.reconstruct() == p

    def test_boundary_case_may_fail_gracefully(self):
        # x1^2 - x2^2 never certifies, nothing to exactify; and a zero-margin
        # dd Gram may round to a slightly infeasible one, returning None
        p = Polynomial(2, {(2, 0): 1, (0, 2): 1})
        cert = check_membership(p, ConvexityCone.DSOS)
        out = exactify(cert, p)
        assert out is None or out.margin >= 0


class TestRationalPsd:
    def test_positive_definite(self):
        assert rational_psd_check([[2, 1], [1, 2]])

    def test_positive_semidefinite_rank_one(self):
        assert rational_psd_check([[1, 1], [1, 1]])

    def test_indefinite(self):
        assert not rational_psd_check([[1, 2], [2, 1]])

    def test_zero_diagonal_with_offdiagonal(self):
        assert not rational_psd_check([[0, 1], [1, 0]])

    def test_zero_matrix(self):
        assert rational_psd_check([[0, 0], [0, 0]])

    def test_fraction_entries(self):
        assert rational_psd_check([[Fraction(1, 2), Fraction(1, 3)],
                                   [Fraction(1, 3), Fraction(1, 2)]])


class TestQuadraticDcdCheck:
    def test_identity_decomposition(self):
        f = Polynomial(1, {(2,): 1})
        assert quadratic_dcd_check(f, f)

    def test_concave_f_with_zero_g(self):
        f = Polynomial(1, {(2,): -1})
        g = Polynomial.zero(1)
        assert quadratic_dcd_check(f, g)

    def test_concave_g_rejected(self):
        f = Polynomial(1, {(2,): 1})
        g = Polynomial(1, {(2,): -1})
        assert not quadratic_dcd_check(f, g)

    def test_float_mode(self):
        f = Polynomial(2, {(2, 0): 1.0, (0, 2): -1.0}, FLOAT)
        g = Polynomial(2, {(2, 0): 1.0}, FLOAT)
        assert quadratic_dcd_check(f, g)

    def test_non_quadratic_rejected(self):
        with pytest.raises(ValueError):
            quadratic_dcd_check(Polynomial(1, {(4,): 1}), Polynomial.zero(1))


class TestFamilyScan:
    def test_origin_is_dsos_convex(self):
        pts = scan_parametric_family(0, [0.0], [0.0])
        assert pts[0].level == "dsos"

    def test_negative_b_breaks_dsos(self):
        # the x2^2 y1^2 Gram diagonal is forced to 2b < 0
        pts = scan_parametric_family(0, [0.0], [-1.0])
        assert not pts[0].dsos

    def test_nesting_on_small_grid(self):
        pts = scan_parametric_family(0, [-4.0, 0.0, 4.0], [-4.0, 0.0, 4.0])
        assert all(p.nested for p in pts)

    def test_csv_shape(self):
        pts = scan_parametric_family(1, [0.0], [0.0, 1.0])
        text = scan_csv(pts)
        lines = text.strip().split("\n")
        assert lines[0] == "a,b,c,level"
        assert len(lines) == 3

    def test_empty_grid_gives_header_only(self):
        assert scan_csv(scan_parametric_family(0, [], [])) == "a,b,c,level\n"
