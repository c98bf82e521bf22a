"""Self-contained conic programming layer: problem containers, PSD-block
constraint fragments, and a dense interior-point solver."""

from .blocks import (
    MalformedHandle,
    add_hyperbolic,
    add_quadratic_epigraph,
    add_squared_linear,
    emit_epigraph_blocks,
)
from .problem import (
    ConeSpec,
    ConicProblem,
    ConicSolution,
    Constraint,
    LinExpr,
    ProblemBuilder,
    SolveStatus,
    dump_problem,
    validate,
)
from .solver import SolverOptions, solve

__all__ = [
    "ConeSpec",
    "ConicProblem",
    "ConicSolution",
    "Constraint",
    "LinExpr",
    "ProblemBuilder",
    "SolveStatus",
    "SolverOptions",
    "MalformedHandle",
    "add_hyperbolic",
    "add_quadratic_epigraph",
    "add_squared_linear",
    "dump_problem",
    "emit_epigraph_blocks",
    "solve",
    "validate",
]
