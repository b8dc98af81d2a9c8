"""Convex-concave minimization of polynomials via dc decompositions.

Each constraint and the objective is split as f_i = g_i - h_i with certified
convex parts; one iteration replaces every -h_i by its linearization at the
current iterate, producing a convex polynomial program.  That subproblem is
solved twice over: a sum-of-squares program supplies the exact optimal value
(the convex parts are sos-convex by construction, making the degree-matched
relaxation tight), and a log-barrier Newton descent supplies the minimizer.
Starting feasible, every iterate stays feasible and the objective never
increases.

``multi_decomp_ccp`` re-decomposes every function at each iterate, minimizing
a diagonally-dominant upper bound on the largest Hessian eigenvalue of h at
the current point, so the per-iteration programs stay LPs or SOCPs.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .certify import ConvexityCone, LinearPoly, build_basis, gram_equalities
from .conic import ConicProgram, LinExpr, MatrixCone, SolveStatus, solve
from .dcd import (
    LAMBDA_MAX_AT_POINT,
    UNDOMINATED,
    DecompositionRequest,
    decompose,
)
from .poly import FLOAT, RATIONAL, Polynomial, iter_exponents_up_to


class SubroutineError(RuntimeError):
    pass


# Values or iterates beyond this magnitude mean the convex subproblem has no
# finite minimum (the sos bound drifts to -inf and the descent runs away).
UNBOUNDED_GUARD = 1e9


@dataclass(frozen=True)
class ProblemInstance:
    """min f0(x) subject to each constraint polynomial being <= 0."""
    f0: Polynomial
    constraints: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))
        for c in self.constraints:
            if c.n != self.f0.n:
                raise ValueError("constraint variable count differs from objective")

    @property
    def n(self) -> int:
        return self.f0.n


@dataclass(frozen=True)
class CcpConfig:
    max_iterations: int = 500
    time_budget: float = 240.0
    objective_tolerance: float = 1e-6
    step_tolerance: float = 1e-8
    subroutine_tolerance: float = 1e-6
    decomposition_request: DecompositionRequest = field(
        default_factory=lambda: DecompositionRequest(UNDOMINATED, ConvexityCone.SOS))
    # multiple-decomposition variant: per-iteration cone and lambda bound cone
    multi_cone: ConvexityCone = ConvexityCone.SDSOS
    multi_bound_cone: MatrixCone = MatrixCone.SDD

    def __post_init__(self):
        if self.max_iterations < 1 and self.time_budget <= 0:
            raise ValueError("at least one stopping criterion must be active")


@dataclass
class CcpIterate:
    k: int
    x: tuple
    f0_value: float
    gamma: float
    wall_ms: float
    decomposition: str
    decompositions: tuple | None = None  # in-memory only

    def to_json_dict(self) -> dict:
        return {"k": self.k, "x": list(self.x), "f0": self.f0_value,
                "gamma": self.gamma, "wall_ms": self.wall_ms,
                "decomposition": self.decomposition}


@dataclass
class CcpTrace:
    x0: tuple
    f0_at_x0: float
    iterates: list
    stop_reason: str
    decompositions: tuple = ()  # the up-front decompositions (classic variant)

    @property
    def final_x(self) -> tuple:
        return self.iterates[-1].x if self.iterates else self.x0

    @property
    def final_value(self) -> float:
        return self.iterates[-1].f0_value if self.iterates else self.f0_at_x0

    def objective_sequence(self) -> list:
        return [self.f0_at_x0] + [it.f0_value for it in self.iterates]

    def to_jsonl(self) -> str:
        return "\n".join(json.dumps(it.to_json_dict()) for it in self.iterates) + "\n"


# ------------------------------------------------------------ convexification


def convexify(g: Polynomial, h: Polynomial, x_k: Sequence[float]) -> Polynomial:
    """Convex majorant g - (h(x_k) + grad h(x_k) . (x - x_k)); touches f at x_k."""
    if g.n != h.n:
        raise ValueError("variable count mismatch")
    n = g.n
    x_k = [float(v) for v in x_k]
    if len(x_k) != n:
        raise ValueError(f"point has length {len(x_k)}, expected {n}")
    hf = h.to_float()
    grads = [float(p.eval(x_k)) for p in hf.gradient()]
    const = float(hf.eval(x_k)) - sum(gi * xi for gi, xi in zip(grads, x_k))
    lin_terms: dict = {tuple([0] * n): const}
    for i, gi in enumerate(grads):
        if gi:
            exp = [0] * n
            exp[i] = 1
            lin_terms[tuple(exp)] = gi
    return g.to_float() - Polynomial(n, lin_terms, FLOAT)


# -------------------------------------------------------- sos value oracle


def sos_optimal_value(f0k: Polynomial, constraints_k: Sequence[Polynomial],
                      solver_tol: float | None = None) -> float:
    """Optimal value of min f0k s.t. constraints_k <= 0 via one SOS program.

    Searches the largest gamma with f0k - gamma = sigma0 - sum(lambda_j f_jk),
    sigma0 sos of the maximum degree among the inputs, lambda_j >= 0.  Exact
    for sos-convex data.
    """
    n = f0k.n
    degree = max([f0k.degree] + [c.degree for c in constraints_k])
    degree += degree % 2
    basis = build_basis(n, degree // 2, homogeneous=False)
    prog = ConicProgram()
    gamma = prog.new_var()
    lambdas = [prog.new_var() for _ in constraints_k]
    if lambdas:
        prog.add_nonneg([LinExpr({lam: 1.0}) for lam in lambdas])
    target = LinearPoly(n)
    target.add_concrete(f0k.to_float())
    target.add_linear(tuple([0] * n), 0.0, {gamma.id: -1.0})
    for lam, cons in zip(lambdas, constraints_k):
        target.add_scaled_var(lam, cons.to_float())
    Q = prog.new_symmat(len(basis.monomials))
    gram_equalities(target, basis, Q, prog)
    prog.add_psd(Q)
    prog.set_objective({gamma: -1.0})
    sol = solve(prog, solver_tol)
    if sol.status == SolveStatus.INFEASIBLE:
        raise SubroutineError("convex subproblem is unbounded below "
                              "(no sos lower bound exists)")
    if sol.status != SolveStatus.OPTIMAL:
        raise SubroutineError(f"sos subroutine failed with status {sol.status.value}")
    return sol.value(gamma)


# ------------------------------------------------------- barrier minimizer


class _Model:
    """Cached gradients/Hessians of the convex subproblem polynomials."""

    def __init__(self, objective: Polynomial, constraints: Sequence[Polynomial]):
        self.n = objective.n
        self.objective = objective.to_float()
        self.constraints = [c.to_float() for c in constraints]
        self._grads = {id(p): p.gradient() for p in [self.objective] + self.constraints}
        self._hesses = {id(p): p.hessian() for p in [self.objective] + self.constraints}

    def value(self, p: Polynomial, x) -> float:
        return float(p.eval(list(x)))

    def grad(self, p: Polynomial, x) -> np.ndarray:
        return np.array([float(q.eval(list(x))) for q in self._grads[id(p)]])

    def hess(self, p: Polynomial, x) -> np.ndarray:
        return np.array(self._hesses[id(p)].eval(list(x)), dtype=float)


def _damped_newton(value, grad, hess, x0, grad_tol=1e-8,
                   max_iter=200, domain=None) -> np.ndarray:
    x = np.asarray(x0, dtype=float).copy()
    for _ in range(max_iter):
        g = grad(x)
        if np.linalg.norm(g) <= grad_tol:
            break
        H = hess(x)
        ridge = 0.0
        while True:
            try:
                step = np.linalg.solve(H + ridge * np.eye(len(x)), -g)
                if g @ step < 0:
                    break
            except np.linalg.LinAlgError:
                pass
            ridge = max(ridge * 10, 1e-10)
            if ridge > 1e8:
                step = -g
                break
        fx = value(x)
        t = 1.0
        for _ in range(60):
            xn = x + t * step
            if (domain is None or domain(xn)) and value(xn) <= fx + 1e-4 * t * (g @ step):
                break
            t *= 0.5
        else:
            break
        if np.linalg.norm(t * step) <= 1e-14 * (1 + np.linalg.norm(x)):
            x = x + t * step
            break
        x = x + t * step
    return x


def _barrier_minimize(model: _Model, x0: np.ndarray, gap_tol: float) -> np.ndarray:
    """Log-barrier Newton descent; iterates stay strictly feasible."""
    cons = model.constraints
    m = len(cons)
    obj = model.objective

    def barrier_funcs(t):
        def val(x):
            s = t * model.value(obj, x)
            for c in cons:
                fx = model.value(c, x)
                if fx >= 0:
                    return float("inf")
                s -= np.log(-fx)
            return s

        def grd(x):
            g = t * model.grad(obj, x)
            for c in cons:
                g += model.grad(c, x) / (-model.value(c, x))
            return g

        def hes(x):
            H = t * model.hess(obj, x)
            for c in cons:
                fx = model.value(c, x)
                gc = model.grad(c, x)
                H += model.hess(c, x) / (-fx) + np.outer(gc, gc) / (fx * fx)
            return H

        def inside(x):
            return all(model.value(c, x) < 0 for c in cons)

        return val, grd, hes, inside

    x = np.asarray(x0, dtype=float).copy()
    t = 1.0
    while True:
        val, grd, hes, inside = barrier_funcs(t)
        x = _damped_newton(val, grd, hes, x, grad_tol=1e-9, domain=inside)
        if m / t <= gap_tol:
            return x
        t *= 20.0


def _phase_one(model: _Model, x0: np.ndarray) -> np.ndarray:
    """Find a strictly feasible point by minimizing a slack bound over f_j <= s."""
    n = model.n
    s0 = max(model.value(c, x0) for c in model.constraints)
    lifted_cons = []
    for c in model.constraints:
        lift = Polynomial(n + 1, {exp + (0,): v for exp, v in c.terms.items()}, FLOAT)
        slack = Polynomial.variable(n + 1, n, FLOAT)
        lifted_cons.append(lift - slack)
    slack_obj = Polynomial.variable(n + 1, n, FLOAT)
    lifted = _Model(slack_obj, lifted_cons)
    z0 = np.append(np.asarray(x0, dtype=float), s0 + 1.0)
    z = _barrier_minimize(lifted, z0, gap_tol=1e-3)
    if max(model.value(c, z[:-1]) for c in model.constraints) >= 0:
        raise SubroutineError("could not find a strictly feasible point")
    return z[:-1]


def convex_subroutine(f0k: Polynomial, constraints_k: Sequence[Polynomial],
                      x_start: Sequence[float], tol: float = 1e-6,
                      solver_tol: float | None = None) -> tuple:
    """Solve the convexified subproblem; returns (x_next, gamma).

    gamma comes from the sos value oracle, x_next from a barrier/Newton
    descent started at x_start; the two must agree to within tol (scaled by
    the value magnitude) or the call fails.
    """
    gamma = sos_optimal_value(f0k, constraints_k, solver_tol)
    if gamma <= -UNBOUNDED_GUARD:
        raise SubroutineError("convex subproblem appears unbounded below")
    model = _Model(f0k, list(constraints_k))
    x = np.asarray([float(v) for v in x_start])
    if model.constraints:
        if max(model.value(c, x) for c in model.constraints) >= 0:
            x = _phase_one(model, x)
        gap_tol = min(tol * 1e-2, 1e-9) * max(1.0, abs(gamma))
        x_next = _barrier_minimize(model, x, gap_tol)
    else:
        x_next = _damped_newton(
            lambda z: model.value(model.objective, z),
            lambda z: model.grad(model.objective, z),
            lambda z: model.hess(model.objective, z),
            x, grad_tol=1e-8)
    achieved = model.value(model.objective, x_next)
    if not np.isfinite(achieved) or abs(achieved) >= UNBOUNDED_GUARD \
            or np.linalg.norm(x_next) >= UNBOUNDED_GUARD:
        raise SubroutineError("convex subproblem appears unbounded below")
    if achieved - gamma > tol * (1.0 + abs(gamma)):
        raise SubroutineError(
            f"descent value {achieved} exceeds sos optimum {gamma} beyond tolerance")
    return tuple(float(v) for v in x_next), float(gamma)


# ------------------------------------------------------------------ the loop


def _check_start(instance: ProblemInstance, x0, tol: float):
    x0 = tuple(float(v) for v in x0)
    if len(x0) != instance.n:
        raise ValueError(f"x0 has length {len(x0)}, expected {instance.n}")
    for c in instance.constraints:
        violation = float(c.to_float().eval(list(x0)))
        if violation > tol:
            raise ValueError(f"infeasible starting point: constraint value {violation}")
    return x0


def _run_loop(instance: ProblemInstance, config: CcpConfig, x0,
              decomposer, label_base: str, solver_tol=None) -> CcpTrace:
    x0 = _check_start(instance, x0, config.subroutine_tolerance)
    f0f = instance.f0.to_float()
    start = time.perf_counter()
    iterates: list[CcpIterate] = []
    x = x0
    f0_prev = float(f0f.eval(list(x)))
    f0_at_x0 = f0_prev
    stop = "max_iterations"
    first_decomps = None
    for k in range(config.max_iterations):
        tic = time.perf_counter()
        decomps = decomposer(k, x)
        if first_decomps is None:
            first_decomps = tuple(decomps)
        convexified = [convexify(d.g, d.h, x) for d in decomps]
        x_next, gamma = convex_subroutine(convexified[0], convexified[1:], x,
                                          config.subroutine_tolerance, solver_tol)
        f0_next = float(f0f.eval(list(x_next)))
        wall_ms = (time.perf_counter() - tic) * 1000.0
        iterates.append(CcpIterate(k, tuple(x_next), f0_next, gamma, wall_ms,
                                   f"{label_base}[{k}]", tuple(decomps)))
        step = np.linalg.norm(np.asarray(x_next) - np.asarray(x))
        x = x_next
        if abs(f0_prev - f0_next) < config.objective_tolerance:
            stop = "objective_tolerance"
            break
        f0_prev = f0_next
        if step < config.step_tolerance:
            stop = "step_tolerance"
            break
        if time.perf_counter() - start > config.time_budget:
            stop = "time_budget"
            break
    return CcpTrace(x0, f0_at_x0, iterates, stop, first_decomps or ())


def ccp(instance: ProblemInstance, config: CcpConfig, x0,
        solver_tol: float | None = None) -> CcpTrace:
    """Classic convex-concave procedure: decompose once, iterate convex solves."""
    request = config.decomposition_request
    if request.objective == LAMBDA_MAX_AT_POINT and request.point is None:
        request = DecompositionRequest(request.objective, request.cone,
                                       point=tuple(float(v) for v in x0),
                                       lambda_bound_cone=request.lambda_bound_cone)
    decomps = [decompose(f, request, solver_tol)
               for f in (instance.f0,) + instance.constraints]

    def decomposer(_k, _x):
        return decomps

    label = f"{request.objective}/{request.cone.label}"
    return _run_loop(instance, config, x0, decomposer, label, solver_tol)


def multi_decomp_ccp(instance: ProblemInstance, config: CcpConfig, x0,
                     solver_tol: float | None = None) -> CcpTrace:
    """Re-decompose every function at each iterate, bounding the largest
    Hessian eigenvalue of h at the current point with a dd/sdd cone, so the
    per-iteration programs stay LPs or SOCPs."""

    def decomposer(_k, x):
        request = DecompositionRequest(
            LAMBDA_MAX_AT_POINT, config.multi_cone, point=tuple(x),
            lambda_bound_cone=config.multi_bound_cone)
        try:
            return [decompose(f, request, solver_tol)
                    for f in (instance.f0,) + instance.constraints]
        except Exception as exc:
            raise SubroutineError(
                f"per-iteration decomposition failed at iterate {_k}: {exc}") from exc

    label = f"multi-{LAMBDA_MAX_AT_POINT}/{config.multi_cone.label}"
    return _run_loop(instance, config, x0, decomposer, label, solver_tol)


# ------------------------------------------------------------------ ensemble


def random_instance(n: int, degree: int, seed: int) -> Polynomial:
    """Coercive random polynomial: sum of x_i^degree plus a dense random part.

    Every monomial of total degree <= degree-1 receives an independent
    integer coefficient uniform on [-30, 30] from a PCG64 stream seeded with
    ``seed``; the leading even powers guarantee a finite minimum.
    """
    if degree % 2 or degree < 2:
        raise ValueError("degree must be even and >= 2")
    if n < 1:
        raise ValueError("need n >= 1")
    rng = np.random.default_rng(seed)
    terms: dict = {}
    for alpha in iter_exponents_up_to(n, degree - 1):
        c = int(rng.integers(-30, 31))
        if c:
            terms[alpha] = c
    for i in range(n):
        exp = [0] * n
        exp[i] = degree
        terms[tuple(exp)] = terms.get(tuple(exp), 0) + 1
    return Polynomial(n, terms, RATIONAL, ambient_degree=degree)


def random_start(n: int, seed: int, scale: float = 1.0) -> tuple:
    """Zero-mean Gaussian starting point, deterministic in the seed."""
    rng = np.random.default_rng(seed)
    return tuple(float(v) for v in scale * rng.standard_normal(n))
