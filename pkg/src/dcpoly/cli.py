"""Command line interface: a thin client over the same handlers as the service.

Exit codes: 0 success, 1 solver failure or infeasibility, 2 usage/parse
errors.  Polynomials are read and written in the package JSON format; set
DCPOLY_SOLVER_TOL to override the conic solver tolerance.
"""

from __future__ import annotations

import json
import sys
from fractions import Fraction

import click

from .bench import (
    CCP_ARMS,
    CCP_CSV_COLUMNS,
    DECOMP_CSV_COLUMNS,
    ball_constraint,
    bench_ccp,
    bench_decomp,
)
from .certify import (
    ConvexityCone,
    GramCertificate,
    check_convexity,
    scan_csv,
    scan_parametric_family,
)
from .conic import MatrixCone
from .dcd import (
    OBJECTIVE_KINDS,
    DecompositionError,
    DecompositionRequest,
    decompose,
    interior_full,
)
from .ccp import CcpConfig, ProblemInstance, SubroutineError, ccp, multi_decomp_ccp, random_instance, random_start
from .poly import Polynomial
from .sphere import monomial_sphere_integral, sphere_area

EXIT_SOLVER = 1
EXIT_PARSE = 2


def _fail(kind: str, message: str, code: int):
    click.echo(json.dumps({"error": kind, "message": message}), err=True)
    sys.exit(code)


def _read_polynomial(path: str | None) -> Polynomial:
    try:
        text = sys.stdin.read() if path in (None, "-") else open(path).read()
    except OSError as exc:
        _fail("io", str(exc), EXIT_PARSE)
    try:
        return Polynomial.from_json(text)
    except ValueError as exc:
        _fail("parse", str(exc), EXIT_PARSE)


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=not text.endswith("\n"))


def _cone_option(label: str) -> ConvexityCone:
    return ConvexityCone.from_label(label)


def _parse_seeds(spec: str) -> list:
    seeds: list[int] = []
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            lo, hi = part.split("..")
            seeds.extend(range(int(lo), int(hi) + 1))
        else:
            seeds.append(int(part))
    return seeds


@click.group()
def main():
    """Difference-of-convex polynomial decomposition toolkit."""


@main.command("decompose")
@click.option("--in", "path", default=None, help="Polynomial JSON file (default stdin).")
@click.option("--objective", type=click.Choice(OBJECTIVE_KINDS), default="feasibility")
@click.option("--cone", type=click.Choice(["dsos", "sdsos", "sos"]), default="sos")
@click.option("--point", default=None, help="Comma-separated anchor point for point objectives.")
@click.option("--radius", type=float, default=None, help="Ball radius for lmax-ball.")
@click.option("--lambda-bound-cone", type=click.Choice(["dd", "sdd", "psd"]), default="psd")
@click.option("--out", default=None, help="Output path (default stdout).")
def cmd_decompose(path, objective, cone, point, radius, lambda_bound_cone, out):
    """Decompose f = g - h with certified convex parts."""
    f = _read_polynomial(path)
    pt = None
    if point is not None:
        try:
            pt = tuple(float(v) for v in point.split(","))
        except ValueError as exc:
            _fail("parse", f"bad point: {exc}", EXIT_PARSE)
    try:
        request = DecompositionRequest(objective, _cone_option(cone), point=pt,
                                       radius=radius,
                                       lambda_bound_cone=MatrixCone(lambda_bound_cone))
    except ValueError as exc:
        _fail("usage", str(exc), EXIT_PARSE)
    try:
        dec = decompose(f, request)
    except (DecompositionError, ValueError) as exc:
        _fail("solver", str(exc), EXIT_SOLVER)
    _emit(json.dumps(dec.to_json_dict(), indent=2), out)


@main.command("check-convexity")
@click.option("--in", "path", default=None)
@click.option("--cone", type=click.Choice(["dsos", "sdsos", "sos"]), default="sos")
@click.option("--certificate/--no-certificate", default=False,
              help="Include the Gram certificate in the output.")
@click.option("--out", default=None)
def cmd_check_convexity(path, cone, certificate, out):
    """Certify dsos/sdsos/sos-convexity of a polynomial."""
    f = _read_polynomial(path)
    result = check_convexity(f, _cone_option(cone))
    if isinstance(result, GramCertificate):
        payload = {"feasible": True, "cone": cone, "margin": float(result.margin)}
        if certificate:
            payload["certificate"] = result.to_json_dict()
        _emit(json.dumps(payload, indent=2), out)
    else:
        _emit(json.dumps({"feasible": False, "cone": cone,
                          "margin": result.margin,
                          "status": result.status.value}, indent=2), out)
        sys.exit(EXIT_SOLVER)


@main.command("construct-interior")
@click.option("--n", type=int, required=True)
@click.option("--degree", type=int, required=True, help="Even degree >= 2.")
@click.option("--full/--gram", default=True,
              help="--full emits the polynomial summary, --gram the whole Gram matrix.")
@click.option("--out", default=None)
def cmd_construct_interior(n, degree, full, out):
    """Build the interior dsos-convex polynomial with its exact Gram identity."""
    try:
        built = interior_full(n, degree)
    except ValueError as exc:
        _fail("usage", str(exc), EXIT_PARSE)
    if full:
        payload = {"p": built.p.to_json_dict(), "dd_margin": str(built.dd_margin),
                   "basis_length": len(built.basis.pairs),
                   "identity_exact": built.verify_identity()}
    else:
        payload = built.to_json_dict()
    _emit(json.dumps(payload, indent=2), out)


@main.command("integrate-sphere")
@click.option("--exp", "exponent", required=True,
              help="Comma-separated monomial exponent, e.g. 2,0,0.")
@click.option("--n", type=int, default=None, help="Ambient dimension (default: len(exp)).")
def cmd_integrate_sphere(exponent, n):
    """Exact unit-sphere integral of a monomial (surface measure)."""
    try:
        alpha = tuple(int(v) for v in exponent.split(","))
    except ValueError as exc:
        _fail("parse", f"bad exponent: {exc}", EXIT_PARSE)
    dim = n if n is not None else len(alpha)
    try:
        raw = monomial_sphere_integral(alpha, dim)
        area = sphere_area(dim)
    except ValueError as exc:
        _fail("usage", str(exc), EXIT_PARSE)
    normalized = 0.0 if raw.is_zero else float((raw / area).as_rational())
    click.echo(json.dumps({"exponent": list(alpha), "n": dim, "exact": str(raw),
                           "value": raw.float, "normalized": normalized,
                           "sphere_area": area.float}, indent=2))


@main.command("gen-instance")
@click.option("--n", type=int, required=True)
@click.option("--degree", type=int, required=True)
@click.option("--seed", type=int, default=0)
@click.option("--out", default=None)
def cmd_gen_instance(n, degree, seed, out):
    """Seeded random coercive polynomial from the benchmark ensemble."""
    try:
        poly = random_instance(n, degree, seed)
    except ValueError as exc:
        _fail("usage", str(exc), EXIT_PARSE)
    _emit(poly.to_json(), out)


@main.command("minimize")
@click.option("--algorithm", type=click.Choice(["ccp", "multi-ccp"]), default="ccp")
@click.option("--in", "path", default=None, help="Objective polynomial JSON (otherwise seeded).")
@click.option("--n", type=int, default=None)
@click.option("--degree", type=int, default=None)
@click.option("--seed", type=int, default=0)
@click.option("--objective", type=click.Choice(OBJECTIVE_KINDS), default="undominated")
@click.option("--cone", type=click.Choice(["dsos", "sdsos", "sos"]), default="sos")
@click.option("--radius", type=float, default=None, help="Ball constraint radius.")
@click.option("--budget-s", type=float, default=60.0)
@click.option("--max-iter", type=int, default=500)
@click.option("--out", default=None, help="Trace JSONL output path.")
def cmd_minimize(algorithm, path, n, degree, seed, objective, cone, radius,
                 budget_s, max_iter, out):
    """Minimize a polynomial with the convex-concave procedure."""
    if path is not None:
        f0 = _read_polynomial(path)
    elif n is not None and degree is not None:
        f0 = random_instance(n, degree, seed)
    else:
        _fail("usage", "provide --in or both --n and --degree", EXIT_PARSE)
    constraints = (ball_constraint(f0.n, radius),) if radius is not None else ()
    x0 = random_start(f0.n, seed)
    try:
        request = DecompositionRequest(
            objective, _cone_option(cone),
            point=x0 if objective in ("trace-point", "lmax-point") else None,
            radius=radius if objective == "lmax-ball" else None)
    except ValueError as exc:
        _fail("usage", str(exc), EXIT_PARSE)
    config = CcpConfig(max_iterations=max_iter, time_budget=budget_s,
                       decomposition_request=request)
    instance = ProblemInstance(f0, constraints)
    try:
        if algorithm == "multi-ccp":
            trace = multi_decomp_ccp(instance, config, x0)
        else:
            trace = ccp(instance, config, x0)
    except (DecompositionError, SubroutineError, ValueError) as exc:
        _fail("solver", str(exc), EXIT_SOLVER)
    summary = {"x0": list(trace.x0), "f0_at_x0": trace.f0_at_x0,
               "final_x": list(trace.final_x), "final_value": trace.final_value,
               "iterations": len(trace.iterates), "stop_reason": trace.stop_reason}
    click.echo(json.dumps(summary, indent=2), err=True)
    _emit(trace.to_jsonl(), out)


@main.command("bench-decomp")
@click.option("--n", "n_list", multiple=True, type=int, default=(4, 6, 8))
@click.option("--degree", type=int, default=4)
@click.option("--cone", "cones", multiple=True,
              type=click.Choice(["dsos", "sdsos", "sos"]),
              default=("dsos", "sdsos", "sos"))
@click.option("--seeds", default="0..9", help="Comma list and/or a..b ranges.")
@click.option("--workers", type=int, default=1)
@click.option("--out", default=None)
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="csv")
def cmd_bench_decomp(n_list, degree, cones, seeds, workers, out, fmt):
    """Sphere-trace decomposition benchmark across certificate levels."""
    try:
        seed_list = _parse_seeds(seeds)
    except ValueError as exc:
        _fail("parse", f"bad seeds: {exc}", EXIT_PARSE)
    report = bench_decomp(sorted(set(n_list)), degree,
                          [_cone_option(c) for c in cones], seed_list,
                          workers=workers)
    text = report.to_json() if fmt == "json" else report.to_csv(DECOMP_CSV_COLUMNS)
    _emit(text, out)
    if report.violations:
        click.echo(json.dumps({"violations": report.violations}), err=True)
        sys.exit(EXIT_SOLVER)


@main.command("bench-ccp")
@click.option("--n", type=int, default=4)
@click.option("--degree", type=int, default=4)
@click.option("--seeds", default="0..9")
@click.option("--budget-s", type=float, default=60.0)
@click.option("--radius", type=float, default=None,
              help="Fixed ball radius (default: random integer in [20, 50] per seed).")
@click.option("--arm", "arms", multiple=True, type=click.Choice(CCP_ARMS),
              default=CCP_ARMS)
@click.option("--max-iter", type=int, default=500)
@click.option("--workers", type=int, default=1)
@click.option("--out", default=None)
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="csv")
def cmd_bench_ccp(n, degree, seeds, budget_s, radius, arms, max_iter, workers,
                  out, fmt):
    """Paired comparison of decomposition arms driving the minimization loop."""
    try:
        seed_list = _parse_seeds(seeds)
    except ValueError as exc:
        _fail("parse", f"bad seeds: {exc}", EXIT_PARSE)
    report = bench_ccp(n, degree, seed_list, budget_s, radius=radius, arms=arms,
                       workers=workers, max_iterations=max_iter)
    text = report.to_json() if fmt == "json" else report.to_csv(CCP_CSV_COLUMNS)
    _emit(text, out)


@main.command("scan-family")
@click.option("--c", type=float, default=0.0)
@click.option("--a-min", type=float, default=-6.0)
@click.option("--a-max", type=float, default=6.0)
@click.option("--b-min", type=float, default=-6.0)
@click.option("--b-max", type=float, default=6.0)
@click.option("--step", type=float, default=0.5)
@click.option("--out", default=None)
def cmd_scan_family(c, a_min, a_max, b_min, b_max, step, out):
    """Classify the bivariate quartic family by convexity certificate level."""
    if step <= 0:
        _fail("usage", "step must be positive", EXIT_PARSE)

    def grid(lo, hi):
        out_vals, k, v = [], 0, Fraction(lo)
        while float(v) <= hi + 1e-12:
            out_vals.append(v)
            k += 1
            v = Fraction(lo) + k * Fraction(step)
        return out_vals

    points = scan_parametric_family(c, grid(a_min, a_max), grid(b_min, b_max))
    _emit(scan_csv(points), out)
    bad = [p for p in points if not p.nested]
    if bad:
        click.echo(json.dumps({"nesting_violations": len(bad)}), err=True)
        sys.exit(EXIT_SOLVER)


@main.command("serve")
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
def cmd_serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    uvicorn.run("dcpoly.service:app", host=host, port=port)


if __name__ == "__main__":
    main()
