"""HTTP service exposing the decomposition toolkit.

Every stateless operation is available as a POST endpoint with pydantic
request/response models; polynomials travel in the same JSON shape used by
the files and the CLI ({"n", "degree", "mode", "terms": [{"exp", "coef"}]}).
Long-running benchmark sweeps are CLI-only.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Literal, Optional, Union

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .certify import (
    ConvexityCone,
    GramCertificate,
    check_convexity,
    check_membership,
    scan_parametric_family,
)
from .conic import MatrixCone
from .dcd import (
    OBJECTIVE_KINDS,
    Decomposition,
    DecompositionError,
    DecompositionRequest,
    decompose,
    interior_full,
)
from .ccp import CcpConfig, ProblemInstance, SubroutineError, ccp, multi_decomp_ccp, random_instance, random_start
from .bench import ball_constraint
from .poly import Polynomial
from .sphere import monomial_sphere_integral, sphere_area


class TermModel(BaseModel):
    exp: list[int]
    coef: Union[str, float]


class PolynomialModel(BaseModel):
    n: int
    degree: int
    mode: Literal["rational", "float"]
    terms: list[TermModel]

    @classmethod
    def from_polynomial(cls, p: Polynomial) -> "PolynomialModel":
        return cls.model_validate(p.to_json_dict())

    def to_polynomial(self) -> Polynomial:
        return Polynomial.from_json_dict(self.model_dump())


class DecomposeIn(BaseModel):
    f: PolynomialModel
    objective: str = "feasibility"
    cone: str = "sos"
    point: Optional[list[float]] = None
    radius: Optional[float] = None
    lambda_bound_cone: str = "psd"


class DecomposeOut(BaseModel):
    f: PolynomialModel
    g: PolynomialModel
    h: PolynomialModel
    objective: str
    objective_value: float
    cone: str
    g_margin: float
    h_margin: float

    @classmethod
    def from_decomposition(cls, dec: Decomposition) -> "DecomposeOut":
        return cls.model_validate(dec.to_json_dict())


class ConvexityIn(BaseModel):
    f: PolynomialModel
    cone: str = "sos"


class CertificateModel(BaseModel):
    basis: dict
    Q: list[list[Union[str, float]]]
    cone: str
    margin: Union[str, float]
    mode: str


class ConvexityOut(BaseModel):
    feasible: bool
    cone: str
    margin: Optional[float] = None
    certificate: Optional[CertificateModel] = None
    status: Optional[str] = None


class MembershipIn(BaseModel):
    f: PolynomialModel
    cone: str = "sos"


class InteriorIn(BaseModel):
    n: int = Field(ge=2)
    degree: int = Field(ge=2)


class InteriorOut(BaseModel):
    p: PolynomialModel
    dd_margin: str
    basis_length: int
    identity_exact: bool


class SphereIn(BaseModel):
    exponent: list[int]
    n: Optional[int] = None


class SphereOut(BaseModel):
    exponent: list[int]
    n: int
    exact: str
    value: float
    normalized: float
    sphere_area: float


class GenInstanceIn(BaseModel):
    n: int = Field(ge=1)
    degree: int = Field(ge=2)
    seed: int = 0


class MinimizeIn(BaseModel):
    algorithm: Literal["ccp", "multi-ccp"] = "ccp"
    f0: Optional[PolynomialModel] = None
    n: Optional[int] = None
    degree: Optional[int] = None
    seed: int = 0
    radius: Optional[float] = None
    objective: str = "undominated"
    cone: str = "sos"
    budget_s: float = 60.0
    max_iterations: int = 500
    x0: Optional[list[float]] = None


class IterateModel(BaseModel):
    k: int
    x: list[float]
    f0: float
    gamma: float
    wall_ms: float
    decomposition: str


class MinimizeOut(BaseModel):
    x0: list[float]
    f0_at_x0: float
    final_x: list[float]
    final_value: float
    stop_reason: str
    iterates: list[IterateModel]


class ScanIn(BaseModel):
    c: float = 0.0
    a_min: float = -6.0
    a_max: float = 6.0
    b_min: float = -6.0
    b_max: float = 6.0
    step: float = 0.5


class ScanPointModel(BaseModel):
    a: float
    b: float
    c: float
    level: str
    dsos: bool
    sdsos: bool
    sos: bool


def _cone(label: str) -> ConvexityCone:
    try:
        return ConvexityCone.from_label(label)
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc))


def _matrix_cone(label: str) -> MatrixCone:
    try:
        return MatrixCone(label.lower())
    except ValueError:
        raise HTTPException(status_code=422,
                            detail=f"unknown matrix cone {label!r}")


def build_request(objective: str, cone: str, point, radius,
                  lambda_bound_cone: str) -> DecompositionRequest:
    if objective not in OBJECTIVE_KINDS:
        raise HTTPException(status_code=422,
                            detail=f"unknown objective {objective!r}; "
                                   f"expected one of {OBJECTIVE_KINDS}")
    try:
        return DecompositionRequest(
            objective, _cone(cone),
            point=tuple(point) if point is not None else None,
            radius=radius,
            lambda_bound_cone=_matrix_cone(lambda_bound_cone))
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc))


app = FastAPI(title="dcpoly", description=__doc__)


@app.get("/healthz")
def healthz() -> dict:
    return {"status": "ok"}


@app.post("/decompose", response_model=DecomposeOut)
def decompose_endpoint(body: DecomposeIn) -> DecomposeOut:
    request = build_request(body.objective, body.cone, body.point, body.radius,
                            body.lambda_bound_cone)
    try:
        f = body.f.to_polynomial()
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=f"parse: {exc}")
    try:
        dec = decompose(f, request)
    except DecompositionError as exc:
        raise HTTPException(status_code=409, detail=str(exc))
    return DecomposeOut.from_decomposition(dec)


def _convexity_response(result, cone: ConvexityCone,
                        with_certificate: bool) -> ConvexityOut:
    if isinstance(result, GramCertificate):
        cert = CertificateModel.model_validate(result.to_json_dict()) \
            if with_certificate else None
        return ConvexityOut(feasible=True, cone=cone.label,
                            margin=float(result.margin), certificate=cert)
    return ConvexityOut(feasible=False, cone=cone.label,
                        margin=result.margin, status=result.status.value)


@app.post("/check-convexity", response_model=ConvexityOut)
def check_convexity_endpoint(body: ConvexityIn,
                             certificate: bool = False) -> ConvexityOut:
    cone = _cone(body.cone)
    result = check_convexity(body.f.to_polynomial(), cone)
    return _convexity_response(result, cone, certificate)


@app.post("/check-membership", response_model=ConvexityOut)
def check_membership_endpoint(body: MembershipIn,
                              certificate: bool = False) -> ConvexityOut:
    cone = _cone(body.cone)
    try:
        result = check_membership(body.f.to_polynomial(), cone)
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    return _convexity_response(result, cone, certificate)


@app.post("/construct-interior", response_model=InteriorOut)
def construct_interior_endpoint(body: InteriorIn) -> InteriorOut:
    try:
        built = interior_full(body.n, body.degree)
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    return InteriorOut(p=PolynomialModel.from_polynomial(built.p),
                       dd_margin=str(built.dd_margin),
                       basis_length=len(built.basis.pairs),
                       identity_exact=built.verify_identity())


@app.post("/integrate-sphere", response_model=SphereOut)
def integrate_sphere_endpoint(body: SphereIn) -> SphereOut:
    n = body.n if body.n is not None else len(body.exponent)
    try:
        raw = monomial_sphere_integral(body.exponent, n)
        area = sphere_area(n)
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    normalized = 0.0 if raw.is_zero else float(Fraction((raw / area).as_rational()))
    return SphereOut(exponent=list(body.exponent), n=n, exact=str(raw),
                     value=raw.float, normalized=normalized,
                     sphere_area=area.float)


@app.post("/gen-instance", response_model=PolynomialModel)
def gen_instance_endpoint(body: GenInstanceIn) -> PolynomialModel:
    try:
        poly = random_instance(body.n, body.degree, body.seed)
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    return PolynomialModel.from_polynomial(poly)


@app.post("/minimize", response_model=MinimizeOut)
def minimize_endpoint(body: MinimizeIn) -> MinimizeOut:
    if body.f0 is not None:
        f0 = body.f0.to_polynomial()
    elif body.n is not None and body.degree is not None:
        f0 = random_instance(body.n, body.degree, body.seed)
    else:
        raise HTTPException(status_code=422,
                            detail="provide f0 or (n, degree, seed)")
    constraints = ()
    if body.radius is not None:
        constraints = (ball_constraint(f0.n, body.radius),)
    x0 = tuple(body.x0) if body.x0 is not None else random_start(f0.n, body.seed)
    request = build_request(body.objective, body.cone,
                            list(x0) if body.objective == "lmax-point" else None,
                            body.radius if body.objective == "lmax-ball" else None,
                            "psd")
    config = CcpConfig(max_iterations=body.max_iterations,
                       time_budget=body.budget_s,
                       decomposition_request=request)
    instance = ProblemInstance(f0, constraints)
    try:
        if body.algorithm == "multi-ccp":
            trace = multi_decomp_ccp(instance, config, x0)
        else:
            trace = ccp(instance, config, x0)
    except (DecompositionError, SubroutineError) as exc:
        raise HTTPException(status_code=409, detail=str(exc))
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    return MinimizeOut(
        x0=list(trace.x0), f0_at_x0=trace.f0_at_x0,
        final_x=list(trace.final_x), final_value=trace.final_value,
        stop_reason=trace.stop_reason,
        iterates=[IterateModel.model_validate(it.to_json_dict())
                  for it in trace.iterates])


@app.post("/scan-family", response_model=list[ScanPointModel])
def scan_family_endpoint(body: ScanIn) -> list[ScanPointModel]:
    if body.step <= 0:
        raise HTTPException(status_code=422, detail="step must be positive")
    a_values = _grid(body.a_min, body.a_max, body.step)
    b_values = _grid(body.b_min, body.b_max, body.step)
    points = scan_parametric_family(body.c, a_values, b_values)
    return [ScanPointModel(a=p.a, b=p.b, c=p.c, level=p.level,
                           dsos=p.dsos, sdsos=p.sdsos, sos=p.sos)
            for p in points]


def _grid(lo: float, hi: float, step: float) -> list:
    out = []
    k = 0
    value = Fraction(lo)
    step_f = Fraction(step)
    while float(value) <= hi + 1e-12:
        out.append(value)
        k += 1
        value = Fraction(lo) + k * step_f
    return out
