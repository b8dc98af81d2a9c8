"""Difference-of-convex decompositions of polynomials.

``decompose`` writes f = g - h with both g and h carrying a dsos-, sdsos-,
or sos-convexity certificate, solving one conic program per request.  Five
objectives are supported: pure feasibility, the sphere-averaged Hessian
trace of g (whose optima are undominated decompositions), the Hessian trace
of h at a point, the largest Hessian eigenvalue of h at a point, and the
largest Hessian eigenvalue of h over a ball.

``interior_bivariate`` / ``interior_homogeneous`` / ``interior_full`` build,
in exact rational arithmetic, a polynomial whose Hessian form has a strictly
diagonally dominant Gram matrix.  Its existence makes the dsos-convex cone
full-dimensional, which is what guarantees the feasibility decomposition can
never fail structurally.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import product as iter_product
from typing import Sequence

import numpy as np

from .certify import (
    ConvexityCone,
    GramCertificate,
    Infeasible,
    LinearPoly,
    TensorBasis,
    check_convexity,
    dd_margin,
    expand_gram,
    gram_equalities,
    sdd_margin,
    psd_margin,
    tensor_basis,
)
from .conic import (
    ConicProgram,
    MatrixCone,
    SolveStatus,
    add_lambda_bound,
    add_matrix_cone,
    solve,
)
from .poly import FLOAT, RATIONAL, Polynomial, iter_exponents_up_to
from .sphere import avg_trace_hessian_functional

FEASIBILITY = "feasibility"
UNDOMINATED = "undominated"
TRACE_AT_POINT = "trace-point"
LAMBDA_MAX_AT_POINT = "lmax-point"
LAMBDA_MAX_ON_BALL = "lmax-ball"
OBJECTIVE_KINDS = (FEASIBILITY, UNDOMINATED, TRACE_AT_POINT,
                   LAMBDA_MAX_AT_POINT, LAMBDA_MAX_ON_BALL)


class DecompositionError(RuntimeError):
    def __init__(self, message: str, status: SolveStatus | None = None):
        super().__init__(message)
        self.status = status


@dataclass(frozen=True)
class DecompositionRequest:
    """What to optimize over the set of valid decompositions, and at which
    certificate level."""
    objective: str = FEASIBILITY
    cone: ConvexityCone = ConvexityCone.SOS
    point: tuple | None = None            # trace-point / lmax-point anchor
    radius: float | None = None           # lmax-ball radius
    lambda_bound_cone: MatrixCone = MatrixCone.PSD

    def __post_init__(self):
        if self.objective not in OBJECTIVE_KINDS:
            raise ValueError(f"unknown objective {self.objective!r}")
        if self.objective in (TRACE_AT_POINT, LAMBDA_MAX_AT_POINT) and self.point is None:
            raise ValueError(f"objective {self.objective} needs a point")
        if self.objective == LAMBDA_MAX_ON_BALL:
            if self.radius is None or self.radius <= 0:
                raise ValueError("ball objective needs a radius > 0")
        if self.point is not None:
            object.__setattr__(self, "point", tuple(float(v) for v in self.point))


@dataclass
class Decomposition:
    f: Polynomial
    g: Polynomial
    h: Polynomial
    g_certificate: GramCertificate
    h_certificate: GramCertificate
    objective_value: float
    request: DecompositionRequest

    def to_json_dict(self) -> dict:
        return {
            "f": self.f.to_json_dict(),
            "g": self.g.to_json_dict(),
            "h": self.h.to_json_dict(),
            "objective": self.request.objective,
            "objective_value": self.objective_value,
            "cone": self.request.cone.label,
            "g_margin": float(self.g_certificate.margin),
            "h_margin": float(self.h_certificate.margin),
        }


@dataclass
class DominanceVerdict:
    dominated: bool
    nonaffine: bool
    witness: Polynomial | None = None
    certificate: GramCertificate | None = None


# -------------------------------------------------------- program building


@lru_cache(maxsize=32)
def _monomial_hessian_forms(n: int, two_d: int) -> tuple:
    """(exponent, hessian form of x^exponent) for 2 <= |exponent| <= two_d."""
    out = []
    for alpha in iter_exponents_up_to(n, two_d):
        if sum(alpha) < 2:
            continue
        out.append((alpha, Polynomial.monomial(n, alpha, 1, FLOAT).hessian_form()))
    return tuple(out)


def _embed_xy(p: Polynomial) -> Polynomial:
    """Lift an n-variable polynomial into the 2n-variable (x, y) space."""
    n = p.n
    return Polynomial(2 * n, {exp + (0,) * n: c for exp, c in p.terms.items()},
                      p.mode)


def _certificate(basis, sol, Q, cone: ConvexityCone, membership, target,
                 scale: float = 1.0) -> GramCertificate:
    Qv = sol.symmat_values(Q) * scale
    blocks = []
    if cone == ConvexityCone.SDSOS and hasattr(membership, "blocks"):
        blocks = [(i, j, scale * sol.value(uii), scale * sol.value(ujj),
                   scale * sol.value(uij))
                  for (i, j, uii, ujj, uij) in membership.blocks]
        margin = sdd_margin(blocks, Qv)
    elif cone == ConvexityCone.DSOS:
        margin = dd_margin(Qv)
    else:
        margin = psd_margin(Qv)
    return GramCertificate(basis, Qv, cone, margin, target, FLOAT, blocks)


def _trivial_certificate(p: Polynomial, cone: ConvexityCone) -> GramCertificate:
    """Zero-Gram certificate for a polynomial with identically zero Hessian."""
    basis = tensor_basis(p.n, 0, homogeneous=False)
    N = len(basis.pairs)
    return GramCertificate(basis, np.zeros((N, N)), cone, 0.0,
                           p.hessian_form(), FLOAT)


def decompose(f: Polynomial, request: DecompositionRequest,
              solver_tol: float | None = None) -> Decomposition:
    """Decompose f = g - h with cone-certified convex g and h.

    g ranges over the even-degree space containing f, with affine terms
    pinned to zero (they never touch a Hessian).  After the conic solve, h is
    recomputed as g - f in exact rational arithmetic so the decomposition
    identity holds exactly; solver error lives only in the certificates.
    """
    n = f.n
    f_exact = f.to_rational().pad_to_even_degree()
    two_d = f_exact.ambient_degree
    if f.degree <= 1:
        g = f_exact
        h = Polynomial.zero(n, RATIONAL)
        cone = request.cone
        return Decomposition(f_exact, g, h, _trivial_certificate(g, cone),
                             _trivial_certificate(h, cone), 0.0, request)

    d = two_d // 2
    if request.point is not None and len(request.point) != n:
        raise ValueError(f"point has length {len(request.point)}, expected {n}")

    # Power-of-two coefficient normalization: keeps the solver well scaled
    # and unwinds exactly in rational arithmetic afterwards.
    max_coef = max(abs(float(c)) for c in f_exact.terms.values())
    scale_pow = int(np.clip(np.round(np.log2(max_coef)), -64, 64)) \
        if max_coef > 0 else 0
    scale = Fraction(2) ** scale_pow
    f_work = f_exact.scale(1 / scale)

    prog = ConicProgram()
    coeff_vars = {alpha: prog.new_var()
                  for alpha, _ in _monomial_hessian_forms(n, two_d)}

    hf_g = LinearPoly(2 * n)
    for alpha, hf_mono in _monomial_hessian_forms(n, two_d):
        hf_g.add_scaled_var(coeff_vars[alpha], hf_mono)
    hf_h = hf_g.copy().add_concrete(f_work.to_float().hessian_form(), -1.0)

    basis = tensor_basis(n, d - 1, homogeneous=False)
    Qg = prog.new_symmat(len(basis.pairs))
    gram_equalities(hf_g, basis, Qg, prog)
    mem_g = add_matrix_cone(prog, Qg, request.cone.matrix_cone)
    Qh = prog.new_symmat(len(basis.pairs))
    gram_equalities(hf_h, basis, Qh, prog)
    mem_h = add_matrix_cone(prog, Qh, request.cone.matrix_cone)

    objective = request.objective
    t_var = None
    if objective == FEASIBILITY:
        prog.set_objective({})
    elif objective == UNDOMINATED:
        functional = avg_trace_hessian_functional(n, two_d)
        prog.set_objective({coeff_vars[alpha]: float(w)
                            for alpha, w in functional.coeffs.items()
                            if alpha in coeff_vars})
    elif objective == TRACE_AT_POINT:
        x_bar = request.point
        weights = {}
        for alpha, var in coeff_vars.items():
            w = 0.0
            for i in range(n):
                if alpha[i] < 2:
                    continue
                shifted = list(alpha)
                shifted[i] -= 2
                term = alpha[i] * (alpha[i] - 1)
                for xv, e in zip(x_bar, shifted):
                    term *= xv ** e
                w += term
            if w:
                weights[var] = w
        prog.set_objective(weights)
    elif objective in (LAMBDA_MAX_AT_POINT, LAMBDA_MAX_ON_BALL):
        t_var = prog.new_var()
        if objective == LAMBDA_MAX_AT_POINT:
            _add_lambda_point_rows(prog, t_var, coeff_vars, f_work,
                                   request.point, request.lambda_bound_cone)
        else:
            _add_lambda_ball_rows(prog, t_var, hf_h, f_work,
                                  float(request.radius), request.cone, basis)
        prog.set_objective({t_var: 1.0})

    sol = solve(prog, solver_tol)
    if sol.status != SolveStatus.OPTIMAL:
        msg = f"decomposition solve failed with status {sol.status.value}"
        if request.cone == ConvexityCone.DSOS and objective == FEASIBILITY:
            msg += (" despite the dsos feasibility guarantee; this indicates "
                    "a structural failure of the even-degree Gram machinery")
        raise DecompositionError(msg, sol.status)

    magnitude = max([1.0] + [abs(sol.value(v)) for v in coeff_vars.values()])
    g_terms = {alpha: Fraction(sol.value(var)) * scale
               for alpha, var in coeff_vars.items()
               if abs(sol.value(var)) > 1e-10 * magnitude}
    g = Polynomial(n, g_terms, RATIONAL, ambient_degree=two_d)
    h = g - f_exact

    fscale = float(scale)
    cert_g = _certificate(basis, sol, Qg, request.cone, mem_g,
                          g.hessian_form(), fscale)
    cert_h = _certificate(basis, sol, Qh, request.cone, mem_h,
                          h.hessian_form(), fscale)

    if objective == FEASIBILITY:
        value = 0.0
    elif objective == UNDOMINATED:
        value = float(avg_trace_hessian_functional(n, two_d).apply(g))
    elif objective == TRACE_AT_POINT:
        hess_trace = h.to_float().hessian().trace_polynomial()
        value = float(hess_trace.eval(request.point))
    else:
        value = sol.value(t_var) * fscale
    return Decomposition(f_exact, g, h, cert_g, cert_h, value, request)


def _add_lambda_point_rows(prog, t_var, coeff_vars, f_exact, point, bound_cone):
    """Pin A = Hessian(h)(point) and constrain t*I - A to the bound cone."""
    n = f_exact.n
    Hf = f_exact.to_float().hessian().eval(point)
    A = prog.new_symmat(n)
    for i in range(n):
        for j in range(i, n):
            coeffs = {A[i, j]: 1.0}
            for alpha, var in coeff_vars.items():
                if alpha[i] == 0 or (i == j and alpha[i] < 2) or (i != j and alpha[j] == 0):
                    continue
                shifted = list(alpha)
                shifted[i] -= 1
                shifted[j] -= 1
                w = alpha[i] * (alpha[j] if i != j else alpha[i] - 1)
                for xv, e in zip(point, shifted):
                    w *= xv ** e
                if w:
                    coeffs[var] = coeffs.get(var, 0.0) - w
            prog.add_equality(coeffs, -Hf[i][j])
    add_lambda_bound(prog, t_var, A, bound_cone)


def _add_lambda_ball_rows(prog, t_var, hf_h, f_exact, radius, cone, basis):
    """Certify t*I - Hessian(h)(x) psd on the ball ||x|| <= radius.

    Uses the multiplier identity y^T (t*I - H_h(x) + f1(x) tau(x)) y in the
    requested cone with f1 = sum x_i^2 - R^2 and tau an n x n symmetric
    polynomial matrix, itself cone-constrained through y^T tau(x) y.
    """
    n = f_exact.n
    two_d = f_exact.ambient_degree
    tau_deg = two_d - 4

    ball_poly = LinearPoly(2 * n)
    y_sq = Polynomial(2 * n, {tuple([0] * n + [0] * i + [2] + [0] * (n - 1 - i)): 1.0
                              for i in range(n)}, FLOAT)
    ball_poly.add_scaled_var(t_var, y_sq)
    ball_poly.add_linpoly(hf_h, -1.0)

    if tau_deg >= 0:
        f1 = Polynomial(n, {tuple(2 * e for e in unit): 1.0
                            for unit in np.eye(n, dtype=int).tolist()}, FLOAT) \
             + Polynomial.constant(n, -radius * radius, FLOAT)
        f1_xy = _embed_xy(f1)
        tau_poly = LinearPoly(2 * n)
        for i in range(n):
            for j in range(i, n):
                mult = 1.0 if i == j else 2.0
                for beta in iter_exponents_up_to(n, tau_deg):
                    var = prog.new_var()
                    exp = list(beta) + [0] * n
                    exp[n + i] += 1
                    exp[n + j] += 1
                    tau_poly.add_linear(tuple(exp), 0.0, {var.id: mult})
        Qtau = prog.new_symmat(len(tensor_basis(n, two_d // 2 - 2, False).pairs))
        gram_equalities(tau_poly, tensor_basis(n, two_d // 2 - 2, False), Qtau, prog)
        add_matrix_cone(prog, Qtau, cone.matrix_cone)
        ball_poly.add_linpoly(tau_poly.multiplied_by(f1_xy))

    Qball = prog.new_symmat(len(basis.pairs))
    gram_equalities(ball_poly, basis, Qball, prog)
    add_matrix_cone(prog, Qball, cone.matrix_cone)


# --------------------------------------------------------------- dominance


def dominates(g: Polynomial, g_prime: Polynomial, cone: ConvexityCone,
              solver_tol: float | None = None) -> DominanceVerdict:
    """Does g_prime dominate g, i.e. is g - g_prime convex and nonaffine?

    Sound relative to the cone (a certificate implies true convexity of the
    difference); incomplete for plain convexity, which is intractable to
    decide exactly.
    """
    if g.n != g_prime.n:
        raise ValueError("variable count mismatch")
    c = g.to_rational() - g_prime.to_rational()
    nonaffine = any(sum(e) >= 2 for e in c.terms)
    if not nonaffine:
        return DominanceVerdict(False, False, None, None)
    res = check_convexity(c, cone, solver_tol)
    if isinstance(res, Infeasible):
        return DominanceVerdict(False, True, None, None)
    return DominanceVerdict(True, True, c, res)


# ------------------------------------------------- interior constructions


@dataclass
class InteriorConstruction:
    """A polynomial with an exact, strictly diagonally dominant Gram identity."""
    p: Polynomial
    basis: TensorBasis
    Q: list  # nested lists of Fractions
    dd_margin: Fraction
    sequences: dict = field(default_factory=dict)

    def verify_identity(self) -> bool:
        return expand_gram(self.basis, self.Q, rational=True) == self.p.hessian_form()

    def to_json_dict(self) -> dict:
        return {
            "p": self.p.to_json_dict(),
            "basis": {"n": self.basis.n, "d": self.basis.base.d,
                      "homogeneous": self.basis.base.homogeneous},
            "Q": [[str(q) for q in row] for row in self.Q],
            "dd_margin": str(self.dd_margin),
            "sequences": {k: [str(v) for v in vs] for k, vs in self.sequences.items()},
        }


def _exact_dd_margin(Q: Sequence[Sequence[Fraction]]) -> Fraction:
    N = len(Q)
    if N == 0:
        return Fraction(0)
    return min(Q[i][i] - sum(abs(Q[i][j]) for j in range(N) if j != i)
               for i in range(N))


def _finish_construction(p, basis, Q, sequences) -> InteriorConstruction:
    built = InteriorConstruction(p, basis, Q, _exact_dd_margin(Q), sequences)
    if not built.verify_identity():
        raise AssertionError("Gram identity failed for the interior construction")
    if built.dd_margin <= 0:
        raise AssertionError("interior construction is not strictly dd")
    return built


def interior_bivariate(d: int) -> InteriorConstruction:
    """Bivariate form of degree 2d whose Hessian form has a strictly dd Gram.

    The palindromic even-coefficient polynomial a_0 x1^{2d} + a_1 x1^{2d-2}x2^2
    + ... is built from an explicit rational recursion (one branch for even d,
    one for odd); its Gram matrix is diagonal within each y block, with one
    cross entry per mixed-derivative monomial.
    """
    if d < 1:
        raise ValueError("need d >= 1")
    two_d = 2 * d
    basis = tensor_basis(2, d - 1, homogeneous=True)
    if d == 1:
        p = Polynomial(2, {(2, 0): 1, (0, 2): 1})
        Q = [[Fraction(2), Fraction(0)], [Fraction(0), Fraction(2)]]
        return _finish_construction(p, basis, Q, {"a": [Fraction(1)]})

    half = d // 2 if d % 2 == 0 else (d - 1) // 2
    a = [Fraction(0)] * (half + 1)
    if half >= 1:
        a[1] = Fraction(1)
    for k in range(1, half):
        a[k + 1] = Fraction(2 * two_d - 4 * k, 2 * k + 2) / 2 * a[k]
    if d % 2 == 0:
        a[0] = Fraction(1, d) + Fraction(d, 2 * (two_d - 1)) * a[half]
    else:
        a[0] = 1 + Fraction(2 * (two_d - 2), two_d * (two_d - 1))

    terms: dict = {}
    for k in range(half + 1):
        terms[(two_d - 2 * k, 2 * k)] = a[k]
        terms[(2 * k, two_d - 2 * k)] = a[k]
    p = Polynomial(2, terms)

    beta = {k: a[k] * (two_d - 2 * k) * (two_d - 2 * k - 1) for k in range(half + 1)}
    gamma = {k: a[k] * 2 * k * (2 * k - 1) for k in range(1, half + 1)}
    delta = {k: a[k] * (two_d - 2 * k) * 2 * k for k in range(1, half + 1)}

    N = 2 * d
    Q = [[Fraction(0)] * N for _ in range(N)]
    d2x1 = p.partial(0).partial(0)
    d2x2 = p.partial(1).partial(1)
    dxy = p.partial(0).partial(1)
    for m in range(d):
        Q[m][m] = Fraction(d2x1.coefficient((2 * d - 2 - 2 * m, 2 * m)))
        Q[d + m][d + m] = Fraction(d2x2.coefficient((2 * d - 2 - 2 * m, 2 * m)))
    for (u, v), w in dxy.terms.items():
        if u == v:
            m, mp = 0, d - 1  # middle cross monomial rides the corner entry
        else:
            m, mp = (v - 1) // 2, (v + 1) // 2
        Q[m][d + mp] += Fraction(w)
        Q[d + mp][m] = Q[m][d + mp]
    return _finish_construction(p, basis, Q,
                                {"a": a, "beta": [beta[k] for k in sorted(beta)],
                                 "gamma": [gamma[k] for k in sorted(gamma)],
                                 "delta": [delta[k] for k in sorted(delta)]})


def _split_cross_monomial(mu: Sequence[int], d: int, y1: int, y2: int) -> tuple:
    """Split a degree-2(d-1) monomial into two degree-(d-1) halves.

    The first half carries all of anchor a and no b, the second all of b and
    no a, so that paired with y indices y1 and y2 each half stays clear of
    one x variable other than its own y index (anchor constraints b != y1,
    a != y2).  Lowest-index valid anchor pair, for reproducibility.
    """
    nn = len(mu)
    qualifying = [i for i in range(nn) if mu[i] <= d - 1]
    choice = None
    for b in qualifying:
        if b == y1:
            continue
        for a in qualifying:
            if a != b and a != y2:
                choice = (a, b)
                break
        if choice:
            break
    if choice is None:
        raise AssertionError("cross-monomial split failed")
    a, b = choice
    m1 = [0] * nn
    m1[a] = mu[a]
    need = d - 1 - mu[a]
    for i in range(nn):
        if need == 0:
            break
        if i in (a, b):
            continue
        take = min(mu[i], need)
        m1[i] = take
        need -= take
    if need != 0:
        raise AssertionError("cross-monomial split failed")
    m2 = tuple(m - t for m, t in zip(mu, m1))
    return tuple(m1), m2


def interior_homogeneous(n: int, two_d: int) -> InteriorConstruction:
    """Form of degree two_d in n variables with a strictly dd Gram identity.

    Built by induction on the variable count: the k-variable construction is
    summed over all substitutions into k+1 variables, plus a small multiple
    of the all-even positive-exponent monomial sum to cover the basis
    elements that touch every variable.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    if two_d < 2 or two_d % 2:
        raise ValueError("need even two_d >= 2")
    d = two_d // 2
    if two_d == 2:
        basis = tensor_basis(n, 0, homogeneous=True)
        p = Polynomial(n, {tuple(2 * int(i == k) for i in range(n)): 1
                           for k in range(n)})
        Q = [[Fraction(2) if i == j else Fraction(0) for j in range(n)]
             for i in range(n)]
        return _finish_construction(p, basis, Q, {})

    built = interior_bivariate(d)
    alphas = []
    for nn in range(3, n + 1):
        built, alpha = _lift_construction(built, nn, d)
        alphas.append(alpha)
    if alphas:
        built.sequences["alpha"] = alphas
    return built


def _lift_construction(prev: InteriorConstruction, nn: int, d: int):
    n0 = nn - 1
    two_d = 2 * d
    basis = tensor_basis(nn, d - 1, homogeneous=True)
    index = {basis.element_exponent(k): k for k in range(len(basis.pairs))}
    N = len(basis.pairs)
    N0 = len(prev.basis.pairs)
    prev_pairs = prev.basis.pairs

    q_terms: dict = {}
    Qq = [[Fraction(0)] * N for _ in range(N)]
    for tup in iter_product(range(nn), repeat=n0):
        for exp, coef in prev.p.terms.items():
            new = [0] * nn
            for j, e in enumerate(exp):
                new[tup[j]] += e
            key = tuple(new)
            q_terms[key] = q_terms.get(key, Fraction(0)) + coef
            if q_terms[key] == 0:
                del q_terms[key]
        images = []
        for (y, xexp) in prev_pairs:
            new = [0] * nn
            for j, e in enumerate(xexp):
                new[tup[j]] += e
            key = tuple(new) + tuple(int(i == tup[y]) for i in range(nn))
            images.append(index[key])
        for i in range(N0):
            row = prev.Q[i]
            im_i = images[i]
            for j in range(N0):
                if row[j]:
                    Qq[im_i][images[j]] += row[j]

    v_exps = [tuple(2 * e for e in exp) for exp in _positive_compositions(nn, d)]
    Qv = [[Fraction(0)] * N for _ in range(N)]
    for mu in v_exps:
        for k in range(nn):
            shifted = list(mu)
            shifted[k] -= 2
            b = index[tuple(s // 2 for s in shifted) + tuple(int(i == k) for i in range(nn))]
            Qv[b][b] += mu[k] * (mu[k] - 1)
        for k in range(nn):
            for j in range(k + 1, nn):
                mu_p = list(mu)
                mu_p[k] -= 1
                mu_p[j] -= 1
                m1, m2 = _split_cross_monomial(mu_p, d, k, j)
                b1 = index[m1 + tuple(int(i == k) for i in range(nn))]
                b2 = index[m2 + tuple(int(i == j) for i in range(nn))]
                w = Fraction(mu[k] * mu[j])
                Qv[b1][b2] += w
                Qv[b2][b1] += w

    # Substitutions of nn-1 variables can only reach basis elements touching
    # at most nn-1 distinct variables (y included); the remaining rows carry
    # exactly the positive diagonal of the all-positive-exponent sum.
    def covered(k: int) -> bool:
        y, xexp = basis.pairs[k]
        return len({i for i, e in enumerate(xexp) if e} | {y}) < nn

    covered_rows = [k for k in range(N) if covered(k)]
    uncovered_rows = [k for k in range(N) if not covered(k)]
    for k in uncovered_rows:
        assert all(x == 0 for x in Qq[k]), "substitution reached a full-support row"
        assert Qv[k][k] > 0, "positive-monomial sum misses a full-support row"
        assert all(Qv[k][j] == 0 for j in range(N) if j != k), \
            "cross split leaked into a full-support row"
    if covered_rows:
        margin_q = min(Qq[i][i] - sum(abs(Qq[i][j]) for j in range(N) if j != i)
                       for i in covered_rows)
    else:
        margin_q = Fraction(1)
    if v_exps:
        max_row = max(sum(abs(x) for x in row) for row in Qv)
        alpha = margin_q / (2 * (1 + max_row))
    else:
        alpha = Fraction(0)

    terms = dict(q_terms)
    for mu in v_exps:
        terms[mu] = terms.get(mu, Fraction(0)) + alpha
    p = Polynomial(nn, terms)
    Q = [[Qq[i][j] + alpha * Qv[i][j] for j in range(N)] for i in range(N)]
    seqs = dict(prev.sequences)
    return _finish_construction(p, basis, Q, seqs), alpha


def _positive_compositions(n: int, d: int):
    """Exponent tuples of degree d with every entry >= 1."""
    if d < n:
        return []
    return [tuple(e + 1 for e in exp) for exp in iter_exponents_up_to(n, d - n)
            if sum(exp) == d - n]


def interior_full(n: int, two_d: int) -> InteriorConstruction:
    """Sum of the homogeneous constructions of degrees 2, 4, ..., two_d.

    The Gram matrix is block diagonal across the per-degree tensor bases, so
    the strict dd margin is the minimum of the block margins.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    if two_d < 2 or two_d % 2:
        raise ValueError("need even two_d >= 2")
    d = two_d // 2
    parts = [interior_homogeneous(n, 2 * k) for k in range(1, d + 1)]
    basis = tensor_basis(n, d - 1, homogeneous=False)
    index = {basis.element_exponent(k): k for k in range(len(basis.pairs))}
    N = len(basis.pairs)
    Q = [[Fraction(0)] * N for _ in range(N)]
    p = Polynomial.zero(n)
    for part in parts:
        p = p + part.p
        sub = [index[part.basis.element_exponent(k)]
               for k in range(len(part.basis.pairs))]
        for i, gi in enumerate(sub):
            row = part.Q[i]
            for j, gj in enumerate(sub):
                if row[j]:
                    Q[gi][gj] += row[j]
    built = _finish_construction(p, basis, Q,
                                 {"block_margins": [pt.dd_margin for pt in parts]})
    assert built.dd_margin == min(pt.dd_margin for pt in parts)
    return built
