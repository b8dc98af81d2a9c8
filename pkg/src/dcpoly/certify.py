"""Gram-matrix certificates: dsos/sdsos/sos membership and convexity checks.

A polynomial p of degree 2d is dsos (resp. sdsos, sos) when it admits a
representation p = z^T Q z over a monomial basis z of degree d with Q
diagonally dominant (resp. scaled diagonally dominant, psd).  Convexity
certificates apply the same machinery to the Hessian form y^T H_p(x) y over
a tensor basis of y_i-times-monomial elements.  Membership is decided by
maximizing the cone margin of Q subject to exact coefficient matching, which
turns feasibility into a well-posed optimization and yields a quantitative
margin for every certificate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from fractions import Fraction
from functools import lru_cache
from math import comb
from typing import Sequence, Union

import numpy as np

from .conic import (
    ConicProgram,
    LinExpr,
    MatrixCone,
    SolveStatus,
    SymMatVar,
    VarRef,
    add_matrix_cone,
    solve,
)
from .poly import FLOAT, RATIONAL, Exponent, Polynomial, grlex_key, iter_exponents

MARGIN_CAP = 1e9
MEMBER_TOL = 1e-7


class StructuralInfeasibilityError(ValueError):
    """The chosen basis cannot express a required monomial."""


class ConvexityCone(IntEnum):
    """Certificate levels, ordered by cone inclusion (DSOS is smallest)."""
    DSOS = 1
    SDSOS = 2
    SOS = 3

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def from_label(cls, label: str) -> "ConvexityCone":
        try:
            return cls[label.upper()]
        except KeyError:
            raise ValueError(f"unknown cone {label!r}; expected dsos, sdsos, or sos")

    @property
    def matrix_cone(self) -> MatrixCone:
        return {ConvexityCone.DSOS: MatrixCone.DD,
                ConvexityCone.SDSOS: MatrixCone.SDD,
                ConvexityCone.SOS: MatrixCone.PSD}[self]


# ------------------------------------------------------------------- bases


@dataclass(frozen=True)
class MonomialBasis:
    """Ordered vector of monomials in x, graded-lex, exact or up-to degree d."""
    n: int
    d: int
    homogeneous: bool
    monomials: tuple

    def __len__(self):
        return len(self.monomials)

    def index(self) -> dict:
        return {m: k for k, m in enumerate(self.monomials)}


@lru_cache(maxsize=None)
def build_basis(n: int, d: int, homogeneous: bool) -> MonomialBasis:
    if n < 1 or d < 0:
        raise ValueError("need n >= 1 and d >= 0")
    if homogeneous:
        monomials = tuple(iter_exponents(n, d))
        expected = comb(n + d - 1, d)
    else:
        monomials = tuple(m for k in range(d + 1) for m in iter_exponents(n, k))
        expected = comb(n + d, d)
    assert len(monomials) == expected
    return MonomialBasis(n, d, homogeneous, monomials)


@dataclass(frozen=True)
class TensorBasis:
    """Basis of y_i * (x-monomial) elements, y-major then graded-lex in x."""
    base: MonomialBasis
    pairs: tuple  # ((y_index, x_exponent), ...)

    @property
    def n(self) -> int:
        return self.base.n

    def __len__(self):
        return len(self.pairs)

    def element_exponent(self, k: int) -> Exponent:
        """Exponent of element k in the 2n-variable (x, y) space."""
        y, xexp = self.pairs[k]
        n = self.base.n
        out = list(xexp) + [0] * n
        out[n + y] = 1
        return tuple(out)


@lru_cache(maxsize=None)
def tensor_basis(n: int, d: int, homogeneous: bool) -> TensorBasis:
    base = build_basis(n, d, homogeneous)
    pairs = tuple((y, m) for y in range(n) for m in base.monomials)
    return TensorBasis(base, pairs)


Basis = Union[MonomialBasis, TensorBasis]


@lru_cache(maxsize=256)
def _element_exponents_cached(basis: Basis) -> tuple:
    if isinstance(basis, TensorBasis):
        return tuple(basis.element_exponent(k) for k in range(len(basis)))
    return tuple(basis.monomials)


def _element_exponents(basis: Basis) -> list:
    return list(_element_exponents_cached(basis))


@lru_cache(maxsize=256)
def _product_map(basis: Basis) -> dict:
    """Monomial -> [(i, j, multiplicity)] over upper-triangle basis pairs."""
    exps = _element_exponents_cached(basis)
    N = len(exps)
    products: dict[Exponent, list] = {}
    for i in range(N):
        for j in range(i, N):
            key = tuple(a + b for a, b in zip(exps[i], exps[j]))
            products.setdefault(key, []).append((i, j, 1.0 if i == j else 2.0))
    return products


def basis_descriptor(basis: Basis) -> dict:
    if isinstance(basis, TensorBasis):
        return {"kind": "tensor", "n": basis.n, "d": basis.base.d,
                "homogeneous": basis.base.homogeneous}
    return {"kind": "monomial", "n": basis.n, "d": basis.d,
            "homogeneous": basis.homogeneous}


def basis_from_descriptor(data: dict) -> Basis:
    if data["kind"] == "tensor":
        return tensor_basis(data["n"], data["d"], data["homogeneous"])
    return build_basis(data["n"], data["d"], data["homogeneous"])


# --------------------------------------------------- parametric polynomials


class LinearPoly:
    """Polynomial whose coefficients are affine in conic-program variables.

    terms maps an exponent tuple to [const, {var_id: coeff}].  Used to pose
    Gram coefficient-matching when the target polynomial itself contains
    decision variables (e.g. the unknown convex part of a decomposition).
    """

    __slots__ = ("nvars", "terms")

    def __init__(self, nvars: int):
        self.nvars = nvars
        self.terms: dict[Exponent, list] = {}

    def _slot(self, exp: Exponent) -> list:
        slot = self.terms.get(exp)
        if slot is None:
            slot = [0.0, {}]
            self.terms[exp] = slot
        return slot

    def add_concrete(self, p: Polynomial, scale: float = 1.0) -> "LinearPoly":
        if p.n != self.nvars:
            raise ValueError("variable count mismatch")
        for exp, coef in p.terms.items():
            self._slot(exp)[0] += float(coef) * scale
        return self

    def add_scaled_var(self, var: VarRef, p: Polynomial, scale: float = 1.0) -> "LinearPoly":
        """Add var * p to the parametric polynomial."""
        if p.n != self.nvars:
            raise ValueError("variable count mismatch")
        for exp, coef in p.terms.items():
            vars_ = self._slot(exp)[1]
            vars_[var.id] = vars_.get(var.id, 0.0) + float(coef) * scale
        return self

    def add_linear(self, exp: Exponent, expr_const: float, expr_vars: dict) -> "LinearPoly":
        slot = self._slot(tuple(exp))
        slot[0] += expr_const
        for vid, c in expr_vars.items():
            slot[1][vid] = slot[1].get(vid, 0.0) + c
        return self

    def multiplied_by(self, p: Polynomial) -> "LinearPoly":
        """Product with a concrete polynomial of the same variable count."""
        if p.n != self.nvars:
            raise ValueError("variable count mismatch")
        out = LinearPoly(self.nvars)
        for mexp, mcoef in p.terms.items():
            mc = float(mcoef)
            for exp, (const, vars_) in self.terms.items():
                key = tuple(a + b for a, b in zip(exp, mexp))
                out.add_linear(key, const * mc,
                               {vid: c * mc for vid, c in vars_.items()})
        return out

    def add_linpoly(self, other: "LinearPoly", scale: float = 1.0) -> "LinearPoly":
        if other.nvars != self.nvars:
            raise ValueError("variable count mismatch")
        for exp, (const, vars_) in other.terms.items():
            self.add_linear(exp, const * scale,
                            {vid: c * scale for vid, c in vars_.items()})
        return self

    def copy(self) -> "LinearPoly":
        return LinearPoly(self.nvars).add_linpoly(self)

    @classmethod
    def from_polynomial(cls, p: Polynomial) -> "LinearPoly":
        return cls(p.n).add_concrete(p)


def gram_equalities(target: Union[Polynomial, LinearPoly], basis: Basis,
                    Q: SymMatVar, prog: ConicProgram) -> None:
    """Append coefficient-matching equalities for basis^T Q basis == target.

    Every monomial representable by the basis is pinned (to the target
    coefficient, or to zero when absent).  A target monomial the basis cannot
    express raises StructuralInfeasibilityError if its coefficient is a
    nonzero constant, or pins the offending variable combination to zero if
    the coefficient is parametric.
    """
    if isinstance(target, Polynomial):
        target = LinearPoly.from_polynomial(target)
    N = len(_element_exponents_cached(basis))
    if Q.dim != N:
        raise ValueError(f"Gram dimension {Q.dim} != basis length {N}")
    products = _product_map(basis)
    keys = set(products) | set(target.terms)
    for key in sorted(keys, key=grlex_key):
        const, vars_ = target.terms.get(key, (0.0, {}))
        entries = products.get(key)
        if entries is None:
            if not vars_:
                if const != 0.0:
                    raise StructuralInfeasibilityError(
                        f"monomial {key} with coefficient {const} is not "
                        f"expressible over the basis")
                continue
            prog.add_equality({vid: c for vid, c in vars_.items()}, -const)
            continue
        coeffs: dict = {}
        for i, j, mult in entries:
            ref = Q[i, j]
            coeffs[ref] = coeffs.get(ref, 0.0) + mult
        for vid, c in vars_.items():
            coeffs[vid] = coeffs.get(vid, 0.0) - c
        prog.add_equality(coeffs, const)


# ------------------------------------------------------------- certificates


def expand_gram(basis: Basis, Q, rational: bool) -> Polynomial:
    """Expand basis^T Q basis into a polynomial (exact when rational)."""
    exps = _element_exponents(basis)
    N = len(exps)
    nvars = 2 * basis.n if isinstance(basis, TensorBasis) else basis.n
    terms: dict = {}
    for i in range(N):
        for j in range(i, N):
            q = Q[i][j] if rational else Q[i, j]
            if q == 0:
                continue
            mult = 1 if i == j else 2
            key = tuple(a + b for a, b in zip(exps[i], exps[j]))
            terms[key] = terms.get(key, 0) + mult * q
    return Polynomial(nvars, terms, RATIONAL if rational else FLOAT)


@dataclass
class GramCertificate:
    """Witness that target == basis^T Q basis with Q in the declared cone."""
    basis: Basis
    Q: object  # ndarray (float) or nested list of Fractions (rational)
    cone: ConvexityCone
    margin: object
    target: Polynomial
    mode: str = FLOAT
    blocks: list = field(default_factory=list)  # sdd blocks (i, j, uii, ujj, uij)

    def reconstruct(self) -> Polynomial:
        """Expand basis^T Q basis back into a polynomial."""
        return expand_gram(self.basis, self.Q, self.mode == RATIONAL)

    def reconstruction_error(self) -> float:
        diff = self.reconstruct().to_float() - self.target.to_float()
        return max((abs(c) for c in diff.terms.values()), default=0.0)

    def verify(self, rtol: float = 1e-6) -> bool:
        recon = self.reconstruct().to_float()
        tgt = self.target.to_float()
        for exp in set(recon.terms) | set(tgt.terms):
            a = recon.terms.get(exp, 0.0)
            b = tgt.terms.get(exp, 0.0)
            if abs(a - b) > rtol * (1.0 + abs(b)):
                return False
        return True

    def to_json_dict(self) -> dict:
        if self.mode == RATIONAL:
            qdump = [[str(Fraction(q)) for q in row] for row in self.Q]
            margin = str(Fraction(self.margin))
        else:
            qdump = [[float(q) for q in row] for row in np.asarray(self.Q)]
            margin = float(self.margin)
        return {"basis": basis_descriptor(self.basis), "Q": qdump,
                "cone": self.cone.label, "margin": margin, "mode": self.mode}


@dataclass
class Infeasible:
    """Failed membership: solver status plus the best margin found, if any."""
    status: SolveStatus
    margin: float | None = None


def dd_margin(Q) -> float:
    Q = np.asarray(Q, dtype=float)
    n = Q.shape[0]
    if n == 1:
        return float(Q[0, 0])
    return float(min(Q[i, i] - sum(abs(Q[i, j]) for j in range(n) if j != i)
                     for i in range(n)))


def sdd_margin(blocks, Q) -> float:
    """Min block determinant slack; the block list comes from the solver."""
    Q = np.asarray(Q, dtype=float)
    if Q.shape[0] == 1:
        return float(Q[0, 0])
    if not blocks:
        return 0.0
    slack = min(min(uii * ujj - uij * uij, uii, ujj)
                for (_, _, uii, ujj, uij) in blocks)
    return float(slack)


def psd_margin(Q) -> float:
    Q = np.asarray(Q, dtype=float)
    return float(np.linalg.eigvalsh(Q).min())


def _post_margin(cone: ConvexityCone, Q: np.ndarray, blocks: list) -> float:
    if cone == ConvexityCone.DSOS:
        return dd_margin(Q)
    if cone == ConvexityCone.SDSOS:
        return sdd_margin(blocks, Q)
    return psd_margin(Q)


def _run_membership(target: Union[Polynomial, LinearPoly], basis: Basis,
                    cone: ConvexityCone, solver_tol: float | None,
                    concrete_target: Polynomial) -> Union[GramCertificate, Infeasible]:
    prog = ConicProgram()
    N = len(_element_exponents(basis))
    Q = prog.new_symmat(N)
    gram_equalities(target, basis, Q, prog)
    margin = prog.new_var()
    mem = add_matrix_cone(prog, Q, cone.matrix_cone, margin=margin)
    prog.add_nonneg([LinExpr({margin: -1.0}, MARGIN_CAP)])
    prog.set_objective({margin: -1.0})
    sol = solve(prog, solver_tol)
    if sol.status != SolveStatus.OPTIMAL:
        return Infeasible(sol.status)
    best = sol.value(margin)
    if best < -MEMBER_TOL:
        return Infeasible(sol.status, margin=best)
    Qv = sol.symmat_values(Q)
    blocks = []
    if cone == ConvexityCone.SDSOS and hasattr(mem, "blocks"):
        blocks = [(i, j, sol.value(uii), sol.value(ujj), sol.value(uij))
                  for (i, j, uii, ujj, uij) in mem.blocks]
    return GramCertificate(basis, Qv, cone, _post_margin(cone, Qv, blocks),
                           concrete_target, FLOAT, blocks)


def membership_basis(p: Polynomial) -> MonomialBasis:
    two_d = max(p.ambient_degree, p.degree)
    if two_d % 2:
        raise ValueError("membership needs even degree; pad first")
    return build_basis(p.n, two_d // 2, homogeneous=p.is_form)


def check_membership(p: Polynomial, cone: ConvexityCone,
                     solver_tol: float | None = None) -> Union[GramCertificate, Infeasible]:
    """Certify p as dsos/sdsos/sos, or report infeasibility."""
    basis = membership_basis(p)
    return _run_membership(p.to_float(), basis, cone, solver_tol, p)


def convexity_basis(p: Polynomial) -> TensorBasis:
    two_d = max(p.pad_to_even_degree().ambient_degree, 2)
    return tensor_basis(p.n, two_d // 2 - 1,
                        homogeneous=p.is_form and p.degree == two_d)


def check_convexity(p: Polynomial, cone: ConvexityCone,
                    solver_tol: float | None = None) -> Union[GramCertificate, Infeasible]:
    """Certify dsos/sdsos/sos-convexity of p via its Hessian form."""
    basis = convexity_basis(p)
    hf = p.to_float().hessian_form()
    return _run_membership(hf, basis, cone, solver_tol, p.hessian_form())


# --------------------------------------------------------- exact refinements


def rational_psd_check(M: Sequence[Sequence[Fraction]]) -> bool:
    """Exact psd test by pivoted symmetric elimination (O(n^3) in rationals)."""
    M = [[Fraction(x) for x in row] for row in M]
    active = list(range(len(M)))
    while active:
        pivot = max(active, key=lambda i: M[i][i])
        if M[pivot][pivot] < 0:
            return False
        if M[pivot][pivot] == 0:
            # all remaining diagonals are <= 0; psd needs them all zero rows
            return all(M[i][j] == 0 for i in active for j in active)
        d = M[pivot][pivot]
        active.remove(pivot)
        for i in active:
            if M[i][pivot] == 0:
                continue
            f = M[i][pivot] / d
            for j in active:
                M[i][j] -= f * M[pivot][j]
        for i in active:
            M[i][pivot] = M[pivot][i] = Fraction(0)
    return True


def exactify(cert: GramCertificate, target: Polynomial) -> GramCertificate | None:
    """Round a float certificate to an exact rational one, margin permitting.

    The float Gram matrix is mapped to exact rationals and the per-monomial
    matching defect is absorbed into one designated entry per monomial.  The
    repaired matrix is re-tested exactly; supported for the DD and PSD cones.
    """
    if cert.cone == ConvexityCone.SDSOS:
        return None
    basis = cert.basis
    exps = _element_exponents(basis)
    N = len(exps)
    Q = [[Fraction(float(np.asarray(cert.Q)[i, j])) for j in range(N)] for i in range(N)]
    tgt = target.to_rational()
    products: dict[Exponent, list] = {}
    for i in range(N):
        for j in range(i, N):
            key = tuple(a + b for a, b in zip(exps[i], exps[j]))
            products.setdefault(key, []).append((i, j))
    current: dict[Exponent, Fraction] = {}
    for key, pairs in products.items():
        total = Fraction(0)
        for (i, j) in pairs:
            total += Q[i][j] * (1 if i == j else 2)
        current[key] = total
    for key in set(products) | set(tgt.terms):
        want = tgt.terms.get(key, Fraction(0))
        if key not in products:
            if want != 0:
                return None
            continue
        defect = want - current[key]
        if defect == 0:
            continue
        pairs = products[key]
        i, j = next(((a, b) for a, b in pairs if a == b), pairs[0])
        Q[i][j] += defect / (1 if i == j else 2)
        if i != j:
            Q[j][i] = Q[i][j]
    if cert.cone == ConvexityCone.DSOS:
        slacks = []
        for i in range(N):
            offsum = sum(abs(Q[i][j]) for j in range(N) if j != i)
            slacks.append(Q[i][i] - offsum)
        margin = min(slacks) if slacks else Fraction(0)
        if margin < 0:
            return None
    else:
        if not rational_psd_check(Q):
            return None
        margin = Fraction(0)  # qualitative: exact psd-ness established
    return GramCertificate(basis, Q, cert.cone, margin, tgt, RATIONAL)


# ------------------------------------------------------- quadratic fast path


def quadratic_dcd_check(f: Polynomial, g: Polynomial) -> bool:
    """Is g a valid difference-of-convex decomposition of quadratic f?

    Decided by two symmetric factorizations (g convex and g - f convex);
    no conic solve.  Exact in rational mode, eigenvalue threshold -1e-9 in
    float mode.
    """
    if f.degree > 2 or g.degree > 2:
        raise ValueError("quadratic_dcd_check expects quadratic polynomials")
    if f.n != g.n:
        raise ValueError("variable count mismatch")
    Hg = g.hessian().eval([0] * g.n)
    Hf = f.hessian().eval([0] * f.n)
    n = g.n
    Hdiff = [[Hg[i][j] - Hf[i][j] for j in range(n)] for i in range(n)]
    if f.mode == RATIONAL and g.mode == RATIONAL:
        return rational_psd_check(Hg) and rational_psd_check(Hdiff)
    eig_g = np.linalg.eigvalsh(np.asarray(Hg, dtype=float))
    eig_d = np.linalg.eigvalsh(np.asarray(Hdiff, dtype=float))
    return bool(eig_g.min() >= -1e-9 and eig_d.min() >= -1e-9)


# ------------------------------------------------------------ family scans


@dataclass(frozen=True)
class ScanPoint:
    a: float
    b: float
    c: float
    dsos: bool
    sdsos: bool
    sos: bool

    @property
    def level(self) -> str:
        """Strongest certificate level (innermost cone) that holds."""
        if self.dsos:
            return "dsos"
        if self.sdsos:
            return "sdsos"
        if self.sos:
            return "sos"
        return "none"

    @property
    def nested(self) -> bool:
        return (not self.dsos or self.sdsos) and (not self.sdsos or self.sos)


def family_member(a, b, c) -> Polynomial:
    """The bivariate quartic family 2x1^4 + 2x2^4 + a x1^3 x2 + b x1^2 x2^2 + c x1 x2^3."""
    return Polynomial(2, {(4, 0): 2, (0, 4): 2, (3, 1): Fraction(a),
                          (2, 2): Fraction(b), (1, 3): Fraction(c)})


def scan_parametric_family(c, a_values: Sequence, b_values: Sequence,
                           solver_tol: float | None = None) -> list[ScanPoint]:
    """Convexity level of the quartic family on an (a, b) grid at fixed c."""
    out = []
    for a in a_values:
        for b in b_values:
            p = family_member(a, b, c)
            flags = {}
            for cone in ConvexityCone:
                res = check_convexity(p, cone, solver_tol)
                flags[cone] = isinstance(res, GramCertificate)
            out.append(ScanPoint(float(a), float(b), float(c),
                                 flags[ConvexityCone.DSOS],
                                 flags[ConvexityCone.SDSOS],
                                 flags[ConvexityCone.SOS]))
    return out


def scan_csv(points: Sequence[ScanPoint]) -> str:
    lines = ["a,b,c,level"]
    for pt in points:
        lines.append(f"{pt.a:g},{pt.b:g},{pt.c:g},{pt.level}")
    return "\n".join(lines) + "\n"
