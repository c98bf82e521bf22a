"""Reduction of hyperbolic and convex-quadratic constraints to 2x2 PSD blocks.

Every convex constraint used by the beamforming subproblems is canonicalized
into PSD blocks so the interior-point solver deals with a single cone type.
The `balance` arguments rescale block entries without changing the feasible
set (u*v >= w^2 is invariant under u -> u/s, v -> v*s), which keeps block
diagonals near unity when the natural scales of u and v differ by orders of
magnitude.
"""

from __future__ import annotations

import math

from .problem import LinExpr, ProblemBuilder

__all__ = ["MalformedHandle", "emit_epigraph_blocks", "add_hyperbolic", "add_squared_linear", "add_quadratic_epigraph"]


class MalformedHandle(TypeError):
    """A constraint fragment received something other than an affine handle."""


def _as_expr(x, name: str) -> LinExpr:
    if isinstance(x, LinExpr):
        return x
    if isinstance(x, (int, float)):
        return LinExpr(const=float(x))
    raise MalformedHandle(f"{name} must be a LinExpr or a number, got {type(x).__name__}")


def add_hyperbolic(builder: ProblemBuilder, u, v, w, balance: float = 1.0) -> int:
    """Emit u*v >= w^2 with u, v >= 0 as the 2x2 PSD block [[u, w], [w, v]].

    Returns the index of the new block. `balance` s replaces the block by
    [[u/s, w], [w, v*s]], equivalent for any s > 0.
    """
    u, v, w = _as_expr(u, "u"), _as_expr(v, "v"), _as_expr(w, "w")
    if not balance > 0.0 or not math.isfinite(balance):
        raise MalformedHandle("balance must be a positive finite number")
    block = builder.add_psd_block(2)
    builder.add_eq(builder.psd_entry(block, 0, 0) - u * (1.0 / balance))
    builder.add_eq(builder.psd_entry(block, 0, 1) - w)
    builder.add_eq(builder.psd_entry(block, 1, 1) - v * balance)
    return block


def add_squared_linear(builder: ProblemBuilder, t, s, t_loc: float = 1.0) -> tuple[int, int, int]:
    """Emit t^2 * s >= 1 for affine t >= 0 via an auxiliary scalar r.

    Decomposed as t*r >= 1 and s >= r^2 (two hyperbolic blocks), exact for
    r = 1/t. `t_loc` is a positive scale estimate of t used only for block
    balancing. Returns (r index, first block, second block).
    """
    t, s = _as_expr(t, "t"), _as_expr(s, "s")
    if not t_loc > 0.0 or not math.isfinite(t_loc):
        raise MalformedHandle("t_loc must be a positive finite number")
    r = builder.add_nonneg()
    r_expr = builder.nonneg_var(r)
    b1 = add_hyperbolic(builder, t, r_expr, 1.0, balance=t_loc)
    b2 = add_hyperbolic(builder, s, 1.0, r_expr, balance=1.0 / t_loc)
    return r, b1, b2


def add_quadratic_epigraph(builder: ProblemBuilder, a, t, scale: float = 1.0) -> int:
    """Emit ||a||^2 <= t for a list of real affine components via a Schur block.

    The block is [[scale*I, a], [a^T, t/scale]] of dimension len(a)+1, PSD
    iff t >= ||a||^2. Complex components enter as separate real/imag parts.
    """
    if not scale > 0.0 or not math.isfinite(scale):
        raise MalformedHandle("scale must be a positive finite number")
    try:
        comps = [_as_expr(ai, f"a[{i}]") for i, ai in enumerate(a)]
    except TypeError as exc:
        raise MalformedHandle("a must be a sequence of affine components") from exc
    if not comps:
        raise MalformedHandle("a must be non-empty")
    t = _as_expr(t, "t")
    m = len(comps)
    block = builder.add_psd_block(m + 1)
    for i in range(m):
        builder.add_eq(builder.psd_entry(block, i, i), scale)
        for j in range(i + 1, m):
            builder.add_eq(builder.psd_entry(block, i, j), 0.0)
        builder.add_eq(builder.psd_entry(block, i, m) - comps[i])
    builder.add_eq(builder.psd_entry(block, m, m) - t * (1.0 / scale))
    return block


def emit_epigraph_blocks(builder: ProblemBuilder, kind: str, **refs):
    """Dispatch on `kind` in {hyperbolic, squared_linear, quadratic_form}."""
    if kind == "hyperbolic":
        return add_hyperbolic(builder, refs.pop("u"), refs.pop("v"), refs.pop("w"), **refs)
    if kind == "squared_linear":
        return add_squared_linear(builder, refs.pop("t"), refs.pop("s"), **refs)
    if kind == "quadratic_form":
        return add_quadratic_epigraph(builder, refs.pop("a"), refs.pop("t"), **refs)
    raise MalformedHandle(f"unknown fragment kind {kind!r}")
