"""Necessary conditions and conservation laws for variational problems
with time delay: expression calculus, piecewise-polynomial trajectories,
the delayed action, Euler-Lagrange / DuBois-Reymond / invariance / Noether
checks, and a direct-transcription minimizer."""

from .expr import (
    Binary,
    Constant,
    DomainError,
    EvalError,
    Expression,
    ExpressionError,
    ParseError,
    UnboundVariableError,
    UnknownFunctionError,
    Unary,
    Variable,
    VocabularyError,
    canonicalize,
    diff,
    evaluate,
    parse,
    to_source,
    variables,
)
from .trajectory import (
    DelayedArgs,
    PiecewiseTrajectory,
    TrajectoryError,
    delayed_args,
    effective_breakpoints,
)
from .functional import (
    ActionResult,
    FunctionalError,
    Problem,
    QuadratureSpec,
    action,
    integrate,
    partial,
)
from .conditions import (
    DEFAULT_FIRST_INTEGRAL_TOL,
    FirstIntegralReport,
    PsiEvaluation,
    RegionFit,
    ResidualReport,
    SampleGrid,
    SegmentFit,
    StencilError,
    block_term,
    check_el_differential,
    dbr_first_integral,
    effective_segment,
    el_first_integral,
    el_residual_differential,
    evaluate_psi,
    psi,
    psi_identity_residual,
    region_of,
    sample_times,
    total_derivative,
)
from .noether import (
    ConservationReport,
    SymmetryCandidate,
    SymmetryError,
    check_conservation,
    check_invariance,
    invariance_residual,
    noether_charge,
    rho,
)
from .solver import (
    GridSpec,
    SolveResult,
    SolverError,
    discrete_action,
    discrete_first_variation,
    discrete_gradient,
    minimize,
)
from .document import (
    DocumentError,
    ProblemDocument,
    Tolerances,
    bundled_problem_path,
    load_bundled,
    load_document,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
