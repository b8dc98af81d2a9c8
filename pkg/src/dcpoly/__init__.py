"""Difference-of-convex decompositions of polynomials and CCP minimization."""

from .poly import FLOAT, RATIONAL, Polynomial, PolynomialMatrix
from .conic import (
    ConicProgram,
    ConicSolution,
    MatrixCone,
    SolveStatus,
    SymMatVar,
    VarRef,
    add_dd_membership,
    add_lambda_bound,
    add_sdd_membership,
    solve,
)
from .certify import (
    ConvexityCone,
    GramCertificate,
    Infeasible,
    MonomialBasis,
    TensorBasis,
    build_basis,
    check_convexity,
    check_membership,
    gram_equalities,
    quadratic_dcd_check,
    scan_parametric_family,
    tensor_basis,
)
from .sphere import (
    SphereFunctional,
    avg_trace_hessian_functional,
    monomial_sphere_integral,
    normalized_monomial_integral,
    sphere_area,
)
from .dcd import (
    Decomposition,
    DecompositionError,
    DecompositionRequest,
    DominanceVerdict,
    InteriorConstruction,
    decompose,
    dominates,
    interior_bivariate,
    interior_full,
    interior_homogeneous,
)
from .ccp import (
    CcpConfig,
    CcpTrace,
    ProblemInstance,
    SubroutineError,
    ccp,
    convex_subroutine,
    convexify,
    multi_decomp_ccp,
    random_instance,
    random_start,
)

__version__ = "0.1.0"
