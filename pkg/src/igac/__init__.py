"""Isogeometric collocation on NURBS geometries, with consistency instrumentation.

The main entry points are :func:`builtin_problem`, :func:`solve_problem`,
:func:`run_study` and the estimators in :mod:`igac.consistency`.
"""
from .collocation import (
    POINT_SCHEMES,
    CollocationPoints,
    CollocationSystem,
    Discretization,
    NumericalSolution,
    assemble,
    discretize,
    factorize,
    generate_collocation_points,
    solve,
    solve_problem,
)
from .consistency import (
    BoundReport,
    InterpolationOperator,
    SamplingSpec,
    SplineSpaceDescriptor,
    boundedness_verdict,
    check_bounds,
    dist_to_space,
    estimate_norm_D,
    estimate_norm_I,
    gradient_sup,
    interp_operator_apply,
    linf_norm,
    modulus_of_continuity,
    quasi_interpolant,
)
from .errors import (
    ContractError,
    DomainError,
    EvaluationError,
    IgacError,
    SingularGeometryError,
    SingularSystemError,
)
from .nurbs import (
    GeometryMap,
    NurbsField,
    dumps_geometry,
    eval_field,
    eval_parametric_derivs,
    load_geometry,
    loads_geometry,
    physical_derivs,
)
from .problems import (
    BUILTIN_PROBLEMS,
    FIRST_DERIVATIVE,
    IDENTITY,
    MINUS_LAPLACIAN_PLUS_IDENTITY,
    BvpProblem,
    OperatorSpec,
    apply_boundary,
    apply_operator,
    builtin_problem,
)
from .splines import (
    KnotVector,
    TensorKnotGrid,
    eval_basis,
    find_span,
    greville_abscissae,
    insert_knots,
    knot_grid_size,
    refine_uniform,
)
from .study import ConvergenceRecord, StudyConfig, emit_csv, run_study

__version__ = "0.1.0"
