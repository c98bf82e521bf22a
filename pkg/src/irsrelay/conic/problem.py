"""Containers and builder for small dense conic programs.

Variables live in a product of real symmetric PSD blocks, a nonnegative
orthant, and free scalars. Complex Hermitian blocks are handled upstream by
real embedding, so everything here is real arithmetic.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ConeSpec",
    "LinExpr",
    "Constraint",
    "ConicProblem",
    "ConicSolution",
    "ProblemBuilder",
    "SolveStatus",
    "validate",
    "dump_problem",
]


@dataclass(frozen=True)
class ConeSpec:
    """Shape of the variable space: PSD block dims, nonneg and free scalar counts."""

    psd_block_dims: tuple[int, ...] = ()
    nonneg_count: int = 0
    free_count: int = 0

    def __post_init__(self):
        if any(int(d) < 1 for d in self.psd_block_dims):
            raise ValueError("PSD block dims must be >= 1")
        if self.nonneg_count < 0 or self.free_count < 0:
            raise ValueError("scalar counts must be >= 0")
        object.__setattr__(self, "psd_block_dims", tuple(int(d) for d in self.psd_block_dims))

    @property
    def total_dim(self) -> int:
        """Total variable dimension: sum d(d+1)/2 over blocks plus scalars."""
        return sum(d * (d + 1) // 2 for d in self.psd_block_dims) + self.nonneg_count + self.free_count


class LinExpr:
    """Affine expression over the conic variables.

    Stores a trace coefficient matrix per PSD block, scalar coefficients,
    and a constant offset. Supports +, -, and scaling by floats so builders
    can assemble constraints naturally.
    """

    __slots__ = ("psd", "nonneg", "free", "const")

    def __init__(self, psd=None, nonneg=None, free=None, const=0.0):
        self.psd: dict[int, np.ndarray] = dict(psd) if psd else {}
        self.nonneg: dict[int, float] = dict(nonneg) if nonneg else {}
        self.free: dict[int, float] = dict(free) if free else {}
        self.const = float(const)

    def copy(self) -> "LinExpr":
        return LinExpr({k: v.copy() for k, v in self.psd.items()}, self.nonneg, self.free, self.const)

    def __add__(self, other):
        out = self.copy()
        if isinstance(other, LinExpr):
            for b, m in other.psd.items():
                out.psd[b] = out.psd[b] + m if b in out.psd else m.copy()
            for i, c in other.nonneg.items():
                out.nonneg[i] = out.nonneg.get(i, 0.0) + c
            for i, c in other.free.items():
                out.free[i] = out.free.get(i, 0.0) + c
            out.const += other.const
        else:
            out.const += float(other)
        return out

    __radd__ = __add__

    def __mul__(self, scalar):
        scalar = float(scalar)
        return LinExpr(
            {b: m * scalar for b, m in self.psd.items()},
            {i: c * scalar for i, c in self.nonneg.items()},
            {i: c * scalar for i, c in self.free.items()},
            self.const * scalar,
        )

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other if isinstance(other, LinExpr) else -float(other))

    def __rsub__(self, other):
        return (-self) + float(other)

    def is_finite(self) -> bool:
        return (
            all(np.all(np.isfinite(m)) for m in self.psd.values())
            and all(np.isfinite(c) for c in self.nonneg.values())
            and all(np.isfinite(c) for c in self.free.values())
            and np.isfinite(self.const)
        )


@dataclass(frozen=True)
class Constraint:
    """`expr == rhs` or `expr <= rhs`; the expression carries no constant."""

    expr: LinExpr
    rhs: float
    equality: bool


@dataclass(frozen=True)
class ConicProblem:
    """Standard-form maximization over the cone product described by `spec`."""

    spec: ConeSpec
    objective: LinExpr
    eq_constraints: tuple[Constraint, ...]
    ineq_constraints: tuple[Constraint, ...]


class SolveStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    MAX_ITER = "max_iter"
    NUMERICAL_FAILURE = "numerical_failure"


@dataclass
class ConicSolution:
    """Solver output: primal values per cone block, duals, and quality metrics."""

    status: SolveStatus
    psd_values: list[np.ndarray]
    nonneg_values: np.ndarray
    free_values: np.ndarray
    eq_duals: np.ndarray
    ineq_duals: np.ndarray
    objective_value: float
    duality_gap: float
    primal_residual: float
    dual_residual: float
    iterations: int

    def value(self, expr: LinExpr) -> float:
        """Evaluate an affine expression at the primal point."""
        total = expr.const
        for b, m in expr.psd.items():
            total += float(np.tensordot(m, self.psd_values[b], axes=2))
        for i, c in expr.nonneg.items():
            total += c * float(self.nonneg_values[i])
        for i, c in expr.free.items():
            total += c * float(self.free_values[i])
        return total


class ProblemBuilder:
    """Incrementally assembles a ConicProblem."""

    def __init__(self):
        self._psd_dims: list[int] = []
        self._nonneg = 0
        self._free = 0
        self._eq: list[Constraint] = []
        self._ineq: list[Constraint] = []
        self._objective: LinExpr | None = None

    # -- variable declaration ------------------------------------------------
    def add_psd_block(self, dim: int) -> int:
        self._psd_dims.append(int(dim))
        return len(self._psd_dims) - 1

    def add_nonneg(self) -> int:
        self._nonneg += 1
        return self._nonneg - 1

    def add_free(self) -> int:
        self._free += 1
        return self._free - 1

    # -- expression helpers --------------------------------------------------
    def trace_term(self, block: int, coeff) -> LinExpr:
        """tr(coeff @ X_block) as an expression; `coeff` is symmetrized."""
        coeff = np.asarray(coeff, dtype=float)
        d = self._psd_dims[block]
        if coeff.shape != (d, d):
            raise ValueError(f"coefficient shape {coeff.shape} does not match block dim {d}")
        return LinExpr(psd={block: 0.5 * (coeff + coeff.T)})

    def psd_entry(self, block: int, i: int, j: int) -> LinExpr:
        """The (i, j) entry of a PSD block as an expression."""
        d = self._psd_dims[block]
        m = np.zeros((d, d))
        m[i, j] += 0.5
        m[j, i] += 0.5
        if i == j:
            m[i, j] = 1.0
        return LinExpr(psd={block: m})

    def nonneg_var(self, i: int) -> LinExpr:
        return LinExpr(nonneg={i: 1.0})

    def free_var(self, i: int) -> LinExpr:
        return LinExpr(free={i: 1.0})

    # -- constraints and objective --------------------------------------------
    def _normalize(self, expr: LinExpr, rhs: float) -> tuple[LinExpr, float]:
        out = expr.copy()
        rhs = float(rhs) - out.const
        out.const = 0.0
        return out, rhs

    def add_eq(self, expr: LinExpr, rhs: float = 0.0):
        expr, rhs = self._normalize(expr, rhs)
        self._eq.append(Constraint(expr, rhs, True))

    def add_le(self, expr: LinExpr, rhs: float = 0.0):
        expr, rhs = self._normalize(expr, rhs)
        self._ineq.append(Constraint(expr, rhs, False))

    def add_ge(self, expr: LinExpr, rhs: float = 0.0):
        self.add_le(-expr, -float(rhs))

    def set_objective(self, expr: LinExpr):
        """Objective to maximize."""
        self._objective = expr.copy()

    def build(self) -> ConicProblem:
        if self._objective is None:
            raise ValueError("objective not set")
        spec = ConeSpec(tuple(self._psd_dims), self._nonneg, self._free)
        return ConicProblem(spec, self._objective, tuple(self._eq), tuple(self._ineq))


def _expr_in_range(expr: LinExpr, spec: ConeSpec, where: str, issues: list[str]):
    for b, m in expr.psd.items():
        if not 0 <= b < len(spec.psd_block_dims):
            issues.append(f"{where}: PSD block index {b} out of range")
        elif m.shape != (spec.psd_block_dims[b], spec.psd_block_dims[b]):
            issues.append(f"{where}: coefficient shape {m.shape} mismatches block {b}")
    for i in expr.nonneg:
        if not 0 <= i < spec.nonneg_count:
            issues.append(f"{where}: nonneg index {i} out of range")
    for i in expr.free:
        if not 0 <= i < spec.free_count:
            issues.append(f"{where}: free index {i} out of range")
    if not expr.is_finite():
        issues.append(f"{where}: non-finite coefficient")


def _svec(m: np.ndarray) -> np.ndarray:
    # Scaled upper-triangle vectorization; preserves trace inner products.
    d = m.shape[0]
    iu = np.triu_indices(d)
    out = m[iu] * np.sqrt(2.0)
    out[np.cumsum(np.arange(d, 0, -1)) - np.arange(d, 0, -1)] /= np.sqrt(2.0)
    return out


def _row_vector(expr: LinExpr, spec: ConeSpec) -> np.ndarray:
    parts = []
    for b, d in enumerate(spec.psd_block_dims):
        m = expr.psd.get(b)
        parts.append(_svec(m) if m is not None else np.zeros(d * (d + 1) // 2))
    nn = np.zeros(spec.nonneg_count)
    for i, c in expr.nonneg.items():
        nn[i] = c
    fr = np.zeros(spec.free_count)
    for i, c in expr.free.items():
        fr[i] = c
    parts.extend([nn, fr])
    return np.concatenate(parts) if parts else np.zeros(0)

RANK_TOL = 1e-10


def validate(problem: ConicProblem) -> list[str]:
    """Check dimensional consistency, finiteness, and equality-row independence.

    Returns a list of diagnostics; an empty list means the problem is well
    formed. Never raises: the caller decides what to do with findings.
    """
    issues: list[str] = []
    spec = problem.spec
    _expr_in_range(problem.objective, spec, "objective", issues)
    for idx, con in enumerate(problem.eq_constraints):
        _expr_in_range(con.expr, spec, f"eq[{idx}]", issues)
        if not np.isfinite(con.rhs):
            issues.append(f"eq[{idx}]: non-finite rhs")
    for idx, con in enumerate(problem.ineq_constraints):
        _expr_in_range(con.expr, spec, f"ineq[{idx}]", issues)
        if not np.isfinite(con.rhs):
            issues.append(f"ineq[{idx}]: non-finite rhs")
    if issues:
        return issues
    if problem.eq_constraints:
        rows = np.array([_row_vector(c.expr, spec) for c in problem.eq_constraints])
        # Zero rows are not a rank question; the solver reports `0 == b` rows
        # as trivially infeasible (or drops them when consistent).
        nonzero = rows[np.any(rows != 0.0, axis=1)]
        if nonzero.shape[0]:
            sv = np.linalg.svd(nonzero, compute_uv=False)
            if sv[-1] < RANK_TOL * sv[0] or len(sv) < nonzero.shape[0]:
                issues.append("rank-deficient equalities")
    return issues


def _fmt_expr(expr: LinExpr, spec: ConeSpec) -> str:
    terms = []
    for b in sorted(expr.psd):
        m = expr.psd[b]
        iu = np.triu_indices(m.shape[0])
        for i, j in zip(*iu):
            c = m[i, j] * (1.0 if i == j else 2.0)
            if c != 0.0:
                terms.append(f"{c:+.6e}*X{b}[{i},{j}]")
    for i in sorted(expr.nonneg):
        if expr.nonneg[i] != 0.0:
            terms.append(f"{expr.nonneg[i]:+.6e}*u[{i}]")
    for i in sorted(expr.free):
        if expr.free[i] != 0.0:
            terms.append(f"{expr.free[i]:+.6e}*t[{i}]")
    return " ".join(terms) if terms else "0"


def dump_problem(problem: ConicProblem) -> str:
    """Self-describing text dump for offline inspection: one line per constraint."""
    spec = problem.spec
    lines = [
        f"blocks: psd={list(spec.psd_block_dims)} nonneg={spec.nonneg_count} free={spec.free_count}",
        f"maximize {_fmt_expr(problem.objective, spec)}"
        + (f" {problem.objective.const:+.6e}" if problem.objective.const else ""),
    ]
    for con in problem.eq_constraints:
        lines.append(f"{_fmt_expr(con.expr, spec)} == {con.rhs:.6e}")
    for con in problem.ineq_constraints:
        lines.append(f"{_fmt_expr(con.expr, spec)} <= {con.rhs:.6e}")
    return "\n".join(lines)
