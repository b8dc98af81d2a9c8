"""Solver-agnostic cone programs over nonnegative, rotated-quadratic, and psd cones.

Every LP/SOCP/SDP in the package is expressed as a :class:`ConicProgram` and
solved through :func:`solve`, which translates the program into the embedded
primal-dual interior-point solver (Clarabel).  Diagonally-dominant membership
adds only linear rows, scaled-diagonal-dominance adds rotated quadratic cones,
so the LP/SOCP/SDP complexity separation of the three certificate levels is
preserved exactly.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from enum import Enum
from math import sqrt
from typing import Mapping, NamedTuple, Sequence

import numpy as np
from scipy import sparse

import clarabel

# Interior-point feasibility floor: the embedded solver reliably reaches
# ~1e-9 residuals on clean programs but can saturate near 2e-8 on degenerate
# eigenvalue-bound programs, so the default contract is set above that floor.
# Every downstream tolerance in the package is 1e-6 or looser.
DEFAULT_SOLVER_TOL = 1e-7


def default_solver_tol() -> float:
    """Solver tolerance, overridable via the DCPOLY_SOLVER_TOL env var."""
    raw = os.environ.get("DCPOLY_SOLVER_TOL")
    return float(raw) if raw else DEFAULT_SOLVER_TOL


class VarRef(NamedTuple):
    id: int


class MatrixCone(Enum):
    DD = "dd"
    SDD = "sdd"
    PSD = "psd"


class SolveStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    NUMERICAL_FAILURE = "numerical_failure"


class LinExpr:
    """Affine expression const + sum(coeff_i * x_i) over program variables."""

    __slots__ = ("coeffs", "const")

    def __init__(self, coeffs: Mapping | None = None, const: float = 0.0):
        self.coeffs: dict[int, float] = {}
        if coeffs:
            for var, c in coeffs.items():
                vid = var.id if isinstance(var, VarRef) else int(var)
                c = float(c)
                if c:
                    self.coeffs[vid] = self.coeffs.get(vid, 0.0) + c
        self.const = float(const)

    @classmethod
    def of(cls, var: VarRef, coeff: float = 1.0, const: float = 0.0) -> "LinExpr":
        return cls({var: coeff}, const)

    def plus(self, other: "LinExpr") -> "LinExpr":
        out = LinExpr(self.coeffs, self.const + other.const)
        for vid, c in other.coeffs.items():
            out.coeffs[vid] = out.coeffs.get(vid, 0.0) + c
        return out

    def value(self, x: np.ndarray) -> float:
        return self.const + sum(c * x[v] for v, c in self.coeffs.items())


@dataclass
class SymMatVar:
    """Symmetric matrix of scalar variables (shared refs across the diagonal)."""
    dim: int
    entries: tuple  # entries[i][j] is a VarRef, entries[i][j] == entries[j][i]

    def __getitem__(self, idx) -> VarRef:
        i, j = idx
        return self.entries[i][j]


@dataclass
class NonnegMembership:
    exprs: list  # list[LinExpr], each constrained >= 0


@dataclass
class RotatedQuadMembership:
    u: LinExpr
    v: LinExpr
    ws: list  # u >= 0, v >= 0, u*v >= sum(w_k^2)


@dataclass
class PsdMembership:
    mat: SymMatVar


@dataclass
class DdMembership:
    """Bookkeeping for one diagonally-dominant constraint block."""
    mat: SymMatVar
    abs_vars: dict  # (i, j) with i<j -> VarRef bounding |Q_ij|
    row_membership: NonnegMembership


@dataclass
class SddMembership:
    mat: SymMatVar
    blocks: list  # [(i, j, VarRef uii, VarRef ujj, VarRef uij)]


@dataclass
class ConicSolution:
    status: SolveStatus
    values: np.ndarray
    objective_value: float
    residuals: dict
    infeasible_dd_rows: list = field(default_factory=list)

    def value(self, var: VarRef) -> float:
        return float(self.values[var.id])

    def symmat_values(self, mat: SymMatVar) -> np.ndarray:
        out = np.empty((mat.dim, mat.dim))
        for i in range(mat.dim):
            for j in range(mat.dim):
                out[i, j] = self.values[mat[i, j].id]
        return out


class ConicProgram:
    """Linear objective + linear equalities + cone memberships."""

    def __init__(self):
        self.num_vars = 0
        self.objective: dict[int, float] = {}
        self.equalities: list[tuple[dict[int, float], float]] = []
        self.memberships: list = []
        self._pins: dict[int, float] = {}

    # ------------------------------------------------------------- variables

    def new_var(self) -> VarRef:
        ref = VarRef(self.num_vars)
        self.num_vars += 1
        return ref

    def new_vars(self, count: int) -> list[VarRef]:
        return [self.new_var() for _ in range(count)]

    def new_symmat(self, dim: int) -> SymMatVar:
        if dim < 1:
            raise ValueError("matrix dimension must be >= 1")
        grid = [[None] * dim for _ in range(dim)]
        for i in range(dim):
            for j in range(i, dim):
                ref = self.new_var()
                grid[i][j] = grid[j][i] = ref
        return SymMatVar(dim, tuple(tuple(row) for row in grid))

    # ------------------------------------------------------------ constraints

    def add_equality(self, coeffs: Mapping, rhs: float):
        row: dict[int, float] = {}
        for var, c in coeffs.items():
            vid = var.id if isinstance(var, VarRef) else int(var)
            if vid >= self.num_vars:
                raise ValueError(f"variable {vid} out of range")
            c = float(c)
            if c:
                row[vid] = row.get(vid, 0.0) + c
        if not row:
            raise ValueError("equality with no nonzero coefficient")
        self.equalities.append((row, float(rhs)))

    def pin(self, var: VarRef, value: float):
        self.add_equality({var: 1.0}, value)
        self._pins[var.id] = float(value)

    def add_nonneg(self, exprs: Sequence[LinExpr]) -> NonnegMembership:
        mem = NonnegMembership(list(exprs))
        self.memberships.append(mem)
        return mem

    def add_rotated_quad(self, u: LinExpr, v: LinExpr, ws: Sequence[LinExpr]) -> RotatedQuadMembership:
        mem = RotatedQuadMembership(u, v, list(ws))
        self.memberships.append(mem)
        return mem

    def add_psd(self, mat: SymMatVar) -> PsdMembership:
        mem = PsdMembership(mat)
        self.memberships.append(mem)
        return mem

    def set_objective(self, coeffs: Mapping):
        """Minimize sum(coeffs[var] * var)."""
        self.objective = {}
        for var, c in coeffs.items():
            vid = var.id if isinstance(var, VarRef) else int(var)
            c = float(c)
            if c:
                self.objective[vid] = self.objective.get(vid, 0.0) + c

    def pinned_value(self, var: VarRef) -> float | None:
        return self._pins.get(var.id)


def add_dd_membership(prog: ConicProgram, Q: SymMatVar,
                      margin: VarRef | None = None) -> DdMembership:
    """Constrain Q to be diagonally dominant via auxiliary absolute values.

    Adds s_ij >= |Q_ij| (two linear rows each) and one row per i:
    Q_ii - sum_{j != i} s_ij - margin >= 0.  Pure linear constraints.
    """
    dim = Q.dim
    abs_vars: dict[tuple[int, int], VarRef] = {}
    exprs = []
    for i in range(dim):
        for j in range(i + 1, dim):
            s = prog.new_var()
            abs_vars[(i, j)] = s
            exprs.append(LinExpr({s: 1.0, Q[i, j]: -1.0}))
            exprs.append(LinExpr({s: 1.0, Q[i, j]: 1.0}))
    row_exprs = []
    for i in range(dim):
        coeffs = {Q[i, i]: 1.0}
        for j in range(dim):
            if j == i:
                continue
            s = abs_vars[(min(i, j), max(i, j))]
            coeffs[s] = coeffs.get(s, 0.0) - 1.0
        if margin is not None:
            coeffs[margin] = coeffs.get(margin, 0.0) - 1.0
        row_exprs.append(LinExpr(coeffs))
    rows = prog.add_nonneg(exprs + row_exprs)
    mem = DdMembership(Q, abs_vars, rows)
    prog.memberships.append(mem)
    return mem


def add_sdd_membership(prog: ConicProgram, Q: SymMatVar,
                       margin: VarRef | None = None) -> SddMembership:
    """Constrain Q to be scaled diagonally dominant.

    Q must equal a sum of 2x2-supported psd blocks; each block
    [[u_ii, u_ij], [u_ij, u_jj]] is kept psd through a rotated quadratic
    cone (u_ii >= 0, u_jj >= 0, u_ii*u_jj >= u_ij^2), so the program stays
    an SOCP.  With a margin m, blocks satisfy block - m*I psd.
    """
    dim = Q.dim
    blocks = []
    if dim == 1:
        coeffs = {Q[0, 0]: 1.0}
        if margin is not None:
            coeffs[margin] = -1.0
        prog.add_nonneg([LinExpr(coeffs)])
        mem = SddMembership(Q, blocks)
        prog.memberships.append(mem)
        return mem
    diag_sums: list[dict[int, float]] = [{} for _ in range(dim)]
    for i in range(dim):
        for j in range(i + 1, dim):
            uii = prog.new_var()
            ujj = prog.new_var()
            uij = prog.new_var()
            blocks.append((i, j, uii, ujj, uij))
            diag_sums[i][uii.id] = 1.0
            diag_sums[j][ujj.id] = 1.0
            prog.add_equality({Q[i, j]: 1.0, uij: -1.0}, 0.0)
            mu = LinExpr({uii: 1.0})
            mv = LinExpr({ujj: 1.0})
            if margin is not None:
                mu = mu.plus(LinExpr({margin: -1.0}))
                mv = mv.plus(LinExpr({margin: -1.0}))
            prog.add_rotated_quad(mu, mv, [LinExpr({uij: 1.0})])
    for i in range(dim):
        coeffs = dict(diag_sums[i])
        coeffs[Q[i, i].id] = coeffs.get(Q[i, i].id, 0.0) - 1.0
        prog.add_equality(coeffs, 0.0)
    mem = SddMembership(Q, blocks)
    prog.memberships.append(mem)
    return mem


def add_psd_membership(prog: ConicProgram, Q: SymMatVar,
                       margin: VarRef | None = None) -> PsdMembership:
    """Constrain Q (shifted by -margin*I if given) to the psd cone."""
    if margin is None:
        return prog.add_psd(Q)
    dim = Q.dim
    B = prog.new_symmat(dim)
    for i in range(dim):
        for j in range(i, dim):
            coeffs = {B[i, j]: 1.0, Q[i, j]: -1.0}
            if i == j:
                coeffs[margin] = 1.0
            prog.add_equality(coeffs, 0.0)
    return prog.add_psd(B)


_MATRIX_CONE_ADDERS = {
    MatrixCone.DD: add_dd_membership,
    MatrixCone.SDD: add_sdd_membership,
    MatrixCone.PSD: add_psd_membership,
}


def add_matrix_cone(prog: ConicProgram, Q: SymMatVar, cone: MatrixCone,
                    margin: VarRef | None = None):
    return _MATRIX_CONE_ADDERS[cone](prog, Q, margin)


def add_lambda_bound(prog: ConicProgram, t: VarRef, A: SymMatVar,
                     cone: MatrixCone):
    """Constrain t*I - A to the given cone.

    Any feasible t upper-bounds lambda_max(A); with the DD or SDD cone the
    bound costs only an LP or SOCP, with PSD it is tight.
    """
    dim = A.dim
    B = prog.new_symmat(dim)
    for i in range(dim):
        for j in range(i, dim):
            coeffs = {B[i, j]: 1.0, A[i, j]: 1.0}
            if i == j:
                coeffs[t] = -1.0
            prog.add_equality(coeffs, 0.0)
    return add_matrix_cone(prog, B, cone)


# ---------------------------------------------------------------------- solve


_STATUS_MAP = {
    "Solved": SolveStatus.OPTIMAL,
    "PrimalInfeasible": SolveStatus.INFEASIBLE,
    "DualInfeasible": SolveStatus.UNBOUNDED,
}


def solve(prog: ConicProgram, solver_tol: float | None = None) -> ConicSolution:
    """Solve the program; Optimal guarantees residuals within solver_tol."""
    tol = default_solver_tol() if solver_tol is None else float(solver_tol)
    n = prog.num_vars
    rows_i: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    b: list[float] = []
    cones = []
    r = 0

    def put(expr_coeffs: Mapping[int, float], const: float, negate: bool):
        # slack row: s = b - A x;  negate=True encodes s = const + expr.
        nonlocal r
        sign = -1.0 if negate else 1.0
        for vid, c in expr_coeffs.items():
            rows_i.append(r)
            cols.append(vid)
            vals.append(sign * c)
        b.append(const)
        r += 1

    for coeffs, rhs in prog.equalities:
        put(coeffs, rhs, negate=False)
    if prog.equalities:
        cones.append(clarabel.ZeroConeT(len(prog.equalities)))

    nonneg_rows = 0
    for mem in prog.memberships:
        if isinstance(mem, NonnegMembership):
            nonneg_rows += len(mem.exprs)
    if nonneg_rows:
        for mem in prog.memberships:
            if isinstance(mem, NonnegMembership):
                for expr in mem.exprs:
                    put(expr.coeffs, expr.const, negate=True)
        cones.append(clarabel.NonnegativeConeT(nonneg_rows))

    for mem in prog.memberships:
        if isinstance(mem, RotatedQuadMembership):
            u, v, ws = mem.u, mem.v, mem.ws
            top = u.plus(v)
            mid = u.plus(LinExpr({k: -c for k, c in v.coeffs.items()}, -v.const))
            put(top.coeffs, top.const, negate=True)
            put(mid.coeffs, mid.const, negate=True)
            for w in ws:
                put({k: 2.0 * c for k, c in w.coeffs.items()}, 2.0 * w.const,
                    negate=True)
            cones.append(clarabel.SecondOrderConeT(2 + len(ws)))

    rt2 = sqrt(2.0)
    for mem in prog.memberships:
        if isinstance(mem, PsdMembership):
            m = mem.mat.dim
            for j in range(m):
                for i in range(j + 1):
                    scale = 1.0 if i == j else rt2
                    put({mem.mat[i, j].id: scale}, 0.0, negate=True)
            cones.append(clarabel.PSDTriangleConeT(m))

    A = sparse.csc_matrix((vals, (rows_i, cols)), shape=(r, n))
    q = np.zeros(n)
    for vid, c in prog.objective.items():
        q[vid] = c
    P = sparse.csc_matrix((n, n))
    bvec = np.array(b)

    def run(term_tol: float):
        settings = clarabel.DefaultSettings()
        settings.verbose = False
        settings.tol_gap_abs = term_tol
        settings.tol_gap_rel = term_tol
        settings.tol_feas = term_tol
        solver = clarabel.DefaultSolver(P, q, A, bvec, cones, settings)
        return solver.solve()

    def meets_contract(raw) -> bool:
        # Optimal promises: residuals within tol, duality gap within
        # 100*tol relative to the objective magnitude.
        gap = abs(raw.obj_val - raw.obj_val_dual)
        return (max(raw.r_prim, raw.r_dual) <= tol
                and gap <= 100.0 * tol * (1.0 + abs(raw.obj_val)))

    # Aim one decade below the contract; on a stall, retry at gentler
    # termination targets (which often land cleaner iterates).  Results are
    # accepted only when they satisfy the contract at `tol` itself.
    raw = run(tol * 0.1)
    for relax in (1.0, 50.0):
        if str(raw.status) in _STATUS_MAP or meets_contract(raw):
            break
        raw = run(tol * relax)
    status_name = str(raw.status)

    residuals = {"primal": float(raw.r_prim), "dual": float(raw.r_dual)}
    status = _STATUS_MAP.get(status_name, SolveStatus.NUMERICAL_FAILURE)
    if status == SolveStatus.OPTIMAL and not meets_contract(raw):
        status = SolveStatus.NUMERICAL_FAILURE
    if status == SolveStatus.NUMERICAL_FAILURE and status_name not in _STATUS_MAP \
            and meets_contract(raw):
        status = SolveStatus.OPTIMAL
    values = np.array(raw.x) if status == SolveStatus.OPTIMAL else np.zeros(n)
    objective_value = float(raw.obj_val) if status == SolveStatus.OPTIMAL else float("nan")

    solution = ConicSolution(status, values, objective_value, residuals)
    if status == SolveStatus.INFEASIBLE:
        solution.infeasible_dd_rows = _dd_violations(prog)
    return solution


def _dd_violations(prog: ConicProgram) -> list:
    """Violated dd rows for membership blocks whose entries are all pinned."""
    out = []
    for k, mem in enumerate(prog.memberships):
        if not isinstance(mem, DdMembership):
            continue
        dim = mem.mat.dim
        vals = np.empty((dim, dim))
        known = True
        for i in range(dim):
            for j in range(dim):
                pinned = prog.pinned_value(mem.mat[i, j])
                if pinned is None:
                    known = False
                    break
                vals[i, j] = pinned
            if not known:
                break
        if not known:
            continue
        for i in range(dim):
            slack = vals[i, i] - sum(abs(vals[i, j]) for j in range(dim) if j != i)
            if slack < 0:
                out.append((k, i))
    return out


def dump(prog: ConicProgram) -> str:
    """Sparse text dump of a program, for cross-checking with other solvers.

    Format: one section per component; variables are 0-based indices.
        VARS <n>
        MIN <var>:<coef> ...
        EQ <rhs> <var>:<coef> ...          (one line per equality)
        NONNEG <const> <var>:<coef> ...    (expression >= 0)
        RQUAD u| v| w...                   (u,v >= 0, u*v >= sum w^2)
        PSD <dim> <var indices row-major upper triangle>
    """
    lines = [f"VARS {prog.num_vars}"]
    obj = " ".join(f"{v}:{c:.17g}" for v, c in sorted(prog.objective.items()))
    lines.append(f"MIN {obj}")
    for coeffs, rhs in prog.equalities:
        row = " ".join(f"{v}:{c:.17g}" for v, c in sorted(coeffs.items()))
        lines.append(f"EQ {rhs:.17g} {row}")

    def fmt(expr: LinExpr) -> str:
        row = " ".join(f"{v}:{c:.17g}" for v, c in sorted(expr.coeffs.items()))
        return f"{expr.const:.17g} {row}".strip()

    for mem in prog.memberships:
        if isinstance(mem, NonnegMembership):
            for expr in mem.exprs:
                lines.append(f"NONNEG {fmt(expr)}")
        elif isinstance(mem, RotatedQuadMembership):
            parts = [fmt(mem.u), fmt(mem.v)] + [fmt(w) for w in mem.ws]
            lines.append("RQUAD " + "| ".join(parts))
        elif isinstance(mem, PsdMembership):
            m = mem.mat.dim
            idx = " ".join(str(mem.mat[i, j].id) for i in range(m) for j in range(i, m))
            lines.append(f"PSD {m} {idx}")
    return "\n".join(lines) + "\n"
