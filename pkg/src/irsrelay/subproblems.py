"""The three convexified beamforming subproblems and rank-one recovery.

Each subproblem lifts its beamformers to PSD matrices, introduces slack
variables for signal and interference powers, replaces the nonconvex rate
and relay-SINR rows with their tangent lower bounds, and hands the result to
the conic solver. All problem data is normalized before it reaches the
solver: beamformers carry a unit power budget and channels absorb
sqrt(P_max)/sigma, so slack variables live near the (dimensionless) SINR
scale instead of watts. The slack products S*I are invariant under this
scaling, so Taylor points computed here match the physical quantities.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channels import ChannelSet
from .conic import (
    ConicProblem,
    LinExpr,
    ProblemBuilder,
    SolveStatus,
    SolverOptions,
    add_hyperbolic,
    add_quadratic_epigraph,
    add_squared_linear,
    solve,
)
from .hermitian import complex_from_embedding, real_embedding
from .sca import SlackLocalPoint, taylor_bound_u, taylor_bound_u3, taylor_bound_v
from .system import SystemParams, effective_channels, lifted_channel_matrices, lifted_relay_link, phase_sinrs

__all__ = [
    "NoFeasibleCandidate",
    "SubproblemSolution",
    "bs_local_points",
    "relay_local_points",
    "irs_local_points",
    "build_bs_sdp",
    "build_relay_sdp",
    "build_irs_sdp",
    "randomize_rank_one",
    "optimize_bs",
    "optimize_relay",
    "optimize_irs",
]

_TRACE_FLOOR = 1e-12
_NEAR_RANK_ONE = 1e-6
_SOLVER_OPTS = SolverOptions(gap_tol=1e-7, feas_tol=1e-7, max_iter=100)


class NoFeasibleCandidate(RuntimeError):
    """No randomized rank-one candidate satisfied the feasibility predicate."""


@dataclass
class SubproblemSolution:
    """Outcome of one subproblem: recovered update plus diagnostics."""

    update: object  # G (M, K), F (L, K), or theta (N,) depending on the stage
    surrogate: float
    status: SolveStatus
    slacks: dict = field(default_factory=dict)
    infeasible: bool = False
    solver_iterations: int = 0


# ---------------------------------------------------------------------------
# normalized data and slack local points
# ---------------------------------------------------------------------------

def _outer(v: np.ndarray) -> np.ndarray:
    """v v^H for a 1-D complex vector."""
    return np.outer(v, v.conj())


def _bs_data(ch: ChannelSet, theta, params: SystemParams):
    """Unit-noise, unit-budget phase-1 data: per-user h'' and the relay H''."""
    eff = effective_channels(ch, theta)
    sig = np.sqrt(np.asarray(params.sigma_k2))
    h_hat = eff.h_bs * np.sqrt(params.p_bs_max) / sig[:, None]
    H_hat = eff.H_bs_r * np.sqrt(params.p_bs_max / params.sigma_r2)
    hpp = [_outer(h_hat[k].conj()) for k in range(ch.K)]
    Hpp = H_hat.conj().T @ H_hat
    return hpp, Hpp


def _relay_data(ch: ChannelSet, theta2, params: SystemParams):
    eff = effective_channels(ch, theta2)
    sig = np.sqrt(np.asarray(params.sigma_k2))
    h_hat = eff.h_r * np.sqrt(params.p_r_max) / sig[:, None]
    return [_outer(h_hat[k].conj()) for k in range(ch.K)]


def _tr(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.real(np.tensordot(a, b.conj(), axes=2)))


def bs_local_points(hpp, Hpp, G_lift):
    """Exact slack values of the lifted incumbent; the SCA anchor."""
    K = len(hpp)
    z1, zR = [], []
    for k in range(K):
        sig = max(_tr(G_lift[k], hpp[k]), _TRACE_FLOOR)
        interf = sum(_tr(G_lift[j], hpp[k]) for j in range(K) if j != k) + 1.0
        z1.append(SlackLocalPoint(1.0 / sig, interf))
        t = max(_tr(G_lift[k], Hpp), _TRACE_FLOOR)
        quart = sum(_tr(G_lift[k] @ Hpp, (G_lift[j] @ Hpp).conj().T) for j in range(K) if j != k)
        zR.append(SlackLocalPoint(1.0 / t**2, max(quart, 0.0) + t))
    return z1, zR


def relay_local_points(hpp_r, F_lift):
    K = len(hpp_r)
    z2 = []
    for k in range(K):
        sig = max(_tr(F_lift[k], hpp_r[k]), _TRACE_FLOOR)
        interf = sum(_tr(F_lift[j], hpp_r[k]) for j in range(K) if j != k) + 1.0
        z2.append(SlackLocalPoint(1.0 / sig, interf))
    return z2


@dataclass
class _IRSData:
    """Per-user lifted outer products, all normalized to unit noise."""

    a: list  # a[k][j] = H_b_i_k @ g_j / sigma_k, (N+1,)
    b: list | None  # same for the relay phase, None when the IRS is off there
    C: list  # C[k] = (T @ g_k) / sigma_r, (N+1, L)
    M: list  # C_k C_k^H
    c2_const: np.ndarray | None  # 1 + gamma2 at theta2=0 for the rate rows


def _irs_data(ch: ChannelSet, G, F, params: SystemParams, phase2_with_irs: bool) -> _IRSData:
    sig = np.sqrt(np.asarray(params.sigma_k2))
    T = lifted_relay_link(ch)
    a, b, C, Mk = [], [], [], []
    for k in range(ch.K):
        h_b_i, h_r_i = lifted_channel_matrices(ch, k)
        a.append([h_b_i @ G[:, j] / sig[k] for j in range(ch.K)])
        b.append([h_r_i @ F[:, j] / sig[k] for j in range(ch.K)])
    for k in range(ch.K):
        Ck = np.tensordot(T, G[:, k], axes=([2], [0])) / np.sqrt(params.sigma_r2)
        C.append(Ck)
        Mk.append(Ck @ Ck.conj().T)
    c2 = None
    if not phase2_with_irs:
        eff0 = effective_channels(ch, np.zeros(ch.N))
        gamma2 = phase_sinrs(eff0.h_r, F, np.asarray(params.sigma_k2))
        c2 = 1.0 + gamma2
    return _IRSData(a, b if phase2_with_irs else None, C, Mk, c2)


def _phi_quad(phi: np.ndarray, mat: np.ndarray) -> float:
    return float(np.real(phi.conj() @ mat @ phi))


def irs_local_points(data: _IRSData, Phi: np.ndarray):
    """Exact slack values of a lifted reflection matrix Phi."""
    K = len(data.a)
    z1, z2, zR = [], [], []
    for k in range(K):
        sig1 = max(_tr(Phi, _outer(data.a[k][k])), _TRACE_FLOOR)
        i1 = sum(_tr(Phi, _outer(data.a[k][j])) for j in range(K) if j != k) + 1.0
        z1.append(SlackLocalPoint(1.0 / sig1, i1))
        if data.b is not None:
            sig2 = max(_tr(Phi, _outer(data.b[k][k])), _TRACE_FLOOR)
            i2 = sum(_tr(Phi, _outer(data.b[k][j])) for j in range(K) if j != k) + 1.0
            z2.append(SlackLocalPoint(1.0 / sig2, i2))
        t = max(_tr(Phi, data.M[k]), _TRACE_FLOOR)
        interf = 0.0
        for j in range(K):
            if j != k:
                interf += abs(np.trace(Phi @ (data.C[j] @ data.C[k].conj().T))) ** 2
        zR.append(SlackLocalPoint(1.0 / t**2, interf + t))
    return z1, (z2 if data.b is not None else None), zR


# ---------------------------------------------------------------------------
# problem builders
# ---------------------------------------------------------------------------

def _herm_trace(builder: ProblemBuilder, block: int, a: np.ndarray):
    """tr(A X) for Hermitian A against the real-embedded block variable."""
    return builder.trace_term(block, 0.5 * real_embedding(a))


def _add_rate_row(builder, r_expr, s_expr, i_expr, bound):
    rhs = bound.constant - bound.coeff_s * bound.s_loc - bound.coeff_i * bound.i_loc
    builder.add_le(r_expr - bound.coeff_s * s_expr - bound.coeff_i * i_expr, rhs)


def _add_gamma_row(builder, s_expr, i_expr, bound, gamma_th):
    # v(z_loc) + grad*(z - z_loc) >= gamma_th, linear in (S, I).
    rhs = gamma_th - bound.constant + bound.coeff_s * bound.s_loc + bound.coeff_i * bound.i_loc
    builder.add_ge(bound.coeff_s * s_expr + bound.coeff_i * i_expr, rhs)


@dataclass
class BSHandles:
    g_block: int
    s1: list
    i1: list
    sr: list
    ir: list
    rates: list


def build_bs_sdp(k_active: int, hpp, Hpp, G_lift, c1, z1, zR, gamma_th) -> tuple[ConicProblem, BSHandles]:
    """Inner-AO instance of the BS subproblem with only G_{k_active} free.

    `hpp`/`Hpp` are the normalized channel outer products, `G_lift` the
    current lifted beamformers (unit budget), `c1[k] = 1 + gamma2_k` the
    fixed second-phase constants, and (z1, zR) the Taylor points.
    """
    K = len(hpp)
    M = hpp[0].shape[0]
    b = ProblemBuilder()
    g_block = b.add_psd_block(2 * M)
    s1 = [b.add_nonneg() for _ in range(K)]
    i1 = [b.add_nonneg() for _ in range(K)]
    sr = [b.add_nonneg() for _ in range(K)]
    ir = [b.add_nonneg() for _ in range(K)]
    rates = [b.add_free() for _ in range(K)]

    for k in range(K):
        s1_e, i1_e = b.nonneg_var(s1[k]), b.nonneg_var(i1[k])
        sr_e, ir_e = b.nonneg_var(sr[k]), b.nonneg_var(ir[k])

        # (10): signal power lower bound, hyperbolic only for the active user.
        if k == k_active:
            add_hyperbolic(b, s1_e, _herm_trace(b, g_block, hpp[k]), 1.0, balance=z1[k].s)
        else:
            b.add_ge(s1_e, 1.0 / max(_tr(G_lift[k], hpp[k]), _TRACE_FLOOR))

        # (11): interference upper bound, linear.
        interf = LinExpr()
        const = 1.0
        for j in range(K):
            if j == k:
                continue
            if j == k_active:
                interf = interf + _herm_trace(b, g_block, hpp[k])
            else:
                const += _tr(G_lift[j], hpp[k])
        b.add_le(interf - i1_e, -const)

        # (12): squared signal at the relay.
        if k == k_active:
            add_squared_linear(b, _herm_trace(b, g_block, Hpp), sr_e, t_loc=1.0 / np.sqrt(zR[k].s))
        else:
            t_fix = max(_tr(G_lift[k], Hpp), _TRACE_FLOOR)
            b.add_ge(sr_e, 1.0 / t_fix**2)

        # (13): relay interference, linear in G_{k_active} either way.
        if k == k_active:
            coeff = Hpp.copy().astype(complex)
            for j in range(K):
                if j != k:
                    coeff = coeff + Hpp @ G_lift[j] @ Hpp
            b.add_le(_herm_trace(b, g_block, coeff) - ir_e, 0.0)
        else:
            coeff = Hpp @ G_lift[k] @ Hpp
            const = _tr(G_lift[k], Hpp)
            for j in range(K):
                if j != k and j != k_active:
                    const += _tr(G_lift[k] @ Hpp, (G_lift[j] @ Hpp).conj().T)
            b.add_le(_herm_trace(b, g_block, coeff) - ir_e, -const)

        # Taylor-bounded rate and relay-SINR rows.
        _add_rate_row(b, b.free_var(rates[k]), s1_e, i1_e, taylor_bound_u(z1[k].s, z1[k].i, c1[k]))
        _add_gamma_row(b, sr_e, ir_e, taylor_bound_v(zR[k].s, zR[k].i), gamma_th)

    # (8b): unit power budget minus the fixed users' shares.
    used = sum(float(np.real(np.trace(G_lift[j]))) for j in range(K) if j != k_active)
    b.add_le(_herm_trace(b, g_block, np.eye(M, dtype=complex)), max(1.0 - used, 0.0))

    b.set_objective(sum((b.free_var(r) for r in rates), LinExpr()))
    handles = BSHandles(g_block, s1, i1, sr, ir, rates)
    return b.build(), handles


@dataclass
class RelayHandles:
    f_blocks: list
    s2: list
    i2: list
    rates: list


def build_relay_sdp(hpp_r, c2, z2) -> tuple[ConicProblem, RelayHandles]:
    """Joint relay subproblem: all lifted F_k solved together."""
    K = len(hpp_r)
    L = hpp_r[0].shape[0]
    b = ProblemBuilder()
    f_blocks = [b.add_psd_block(2 * L) for _ in range(K)]
    s2 = [b.add_nonneg() for _ in range(K)]
    i2 = [b.add_nonneg() for _ in range(K)]
    rates = [b.add_free() for _ in range(K)]

    for k in range(K):
        s2_e, i2_e = b.nonneg_var(s2[k]), b.nonneg_var(i2[k])
        add_hyperbolic(b, s2_e, _herm_trace(b, f_blocks[k], hpp_r[k]), 1.0, balance=z2[k].s)
        interf = LinExpr()
        for j in range(K):
            if j != k:
                interf = interf + _herm_trace(b, f_blocks[j], hpp_r[k])
        b.add_le(interf - i2_e, -1.0)
        _add_rate_row(b, b.free_var(rates[k]), s2_e, i2_e, taylor_bound_u(z2[k].s, z2[k].i, c2[k]))

    power = LinExpr()
    for k in range(K):
        power = power + _herm_trace(b, f_blocks[k], np.eye(L, dtype=complex))
    b.add_le(power, 1.0)

    b.set_objective(sum((b.free_var(r) for r in rates), LinExpr()))
    return b.build(), RelayHandles(f_blocks, s2, i2, rates)


@dataclass
class IRSHandles:
    phi_block: int
    s1: list
    i1: list
    s2: list | None
    i2: list | None
    sr: list
    ir: list
    rates: list


def build_irs_sdp(data: _IRSData, z1, z2, zR, gamma_th, n_elements: int) -> tuple[ConicProblem, IRSHandles]:
    """Reflection subproblem over the lifted Phi of dimension N+1.

    When `data.b` is None the IRS is off in the second phase: the phase-2
    slack rows are dropped and the rate rows use fixed constants
    c2 = 1 + gamma2(theta=0), which is the Independent benchmark.
    """
    K = len(data.a)
    N = n_elements
    dim = N + 1
    b = ProblemBuilder()
    phi_block = b.add_psd_block(2 * dim)
    s1 = [b.add_nonneg() for _ in range(K)]
    i1 = [b.add_nonneg() for _ in range(K)]
    with_phase2 = data.b is not None
    s2 = [b.add_nonneg() for _ in range(K)] if with_phase2 else None
    i2 = [b.add_nonneg() for _ in range(K)] if with_phase2 else None
    sr = [b.add_nonneg() for _ in range(K)]
    ir = [b.add_nonneg() for _ in range(K)]
    rates = [b.add_free() for _ in range(K)]

    for k in range(K):
        s1_e, i1_e = b.nonneg_var(s1[k]), b.nonneg_var(i1[k])
        sr_e, ir_e = b.nonneg_var(sr[k]), b.nonneg_var(ir[k])

        # (26)/(27): first-phase signal and interference in Phi.
        add_hyperbolic(b, s1_e, _herm_trace(b, phi_block, _outer(data.a[k][k])), 1.0, balance=z1[k].s)
        interf = LinExpr()
        for j in range(K):
            if j != k:
                interf = interf + _herm_trace(b, phi_block, _outer(data.a[k][j]))
        b.add_le(interf - i1_e, -1.0)

        # (28)/(29): second-phase rows only when the IRS serves that phase.
        if with_phase2:
            s2_e, i2_e = b.nonneg_var(s2[k]), b.nonneg_var(i2[k])
            add_hyperbolic(b, s2_e, _herm_trace(b, phi_block, _outer(data.b[k][k])), 1.0, balance=z2[k].s)
            interf2 = LinExpr()
            for j in range(K):
                if j != k:
                    interf2 = interf2 + _herm_trace(b, phi_block, _outer(data.b[k][j]))
            b.add_le(interf2 - i2_e, -1.0)

        # (12) in Phi: squared signal power at the relay.
        t_expr = _herm_trace(b, phi_block, data.M[k])
        add_squared_linear(b, t_expr, sr_e, t_loc=1.0 / np.sqrt(zR[k].s))

        # (13) in Phi: |alpha_k^H alpha_j|^2 via Schur epigraphs, then linear.
        interf_r = LinExpr()
        for j in range(K):
            if j != k:
                q = data.C[j] @ data.C[k].conj().T
                re = _herm_trace(b, phi_block, 0.5 * (q + q.conj().T))
                im = _herm_trace(b, phi_block, (q - q.conj().T) / 2j)
                e = b.add_nonneg()
                zscale = max(abs(np.trace(q)), np.sqrt(_TRACE_FLOOR))
                add_quadratic_epigraph(b, [re, im], b.nonneg_var(e), scale=zscale)
                interf_r = interf_r + b.nonneg_var(e)
        b.add_le(interf_r + t_expr - ir_e, 0.0)

        # Rate rows: both phases through u3, or fixed phase-2 constants.
        if with_phase2:
            bound = taylor_bound_u3(z1[k], z2[k])
            cs1, ci1, cs2, ci2 = bound.coeffs
            rhs = bound.constant - sum(c * l for c, l in zip(bound.coeffs, bound.locs))
            s2_e, i2_e = b.nonneg_var(s2[k]), b.nonneg_var(i2[k])
            b.add_le(
                b.free_var(rates[k]) - cs1 * s1_e - ci1 * i1_e - cs2 * s2_e - ci2 * i2_e,
                rhs,
            )
        else:
            _add_rate_row(b, b.free_var(rates[k]), s1_e, i1_e, taylor_bound_u(z1[k].s, z1[k].i, data.c2_const[k]))

        _add_gamma_row(b, sr_e, ir_e, taylor_bound_v(zR[k].s, zR[k].i), gamma_th)

    # (21b) lifted: unit diagonal cap and pivot entry fixed at 1.
    for n in range(N):
        e_n = np.zeros((dim, dim), dtype=complex)
        e_n[n, n] = 1.0
        b.add_le(_herm_trace(b, phi_block, e_n), 1.0)
    e_p = np.zeros((dim, dim), dtype=complex)
    e_p[N, N] = 1.0
    b.add_eq(_herm_trace(b, phi_block, e_p), 1.0)

    b.set_objective(sum((b.free_var(r) for r in rates), LinExpr()))
    return b.build(), IRSHandles(phi_block, s1, i1, s2, i2, sr, ir, rates)


# ---------------------------------------------------------------------------
# rank-one recovery
# ---------------------------------------------------------------------------

def _psd_eig(x: np.ndarray):
    w, v = np.linalg.eigh(0.5 * (x + x.conj().T))
    return np.clip(w, 0.0, None), v


def _complex_gaussian(rng, n):
    return (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2.0)


def _postprocess(x: np.ndarray, target: str, power_share: float | None):
    if target in ("bs", "relay"):
        if power_share is not None:
            nrm = np.linalg.norm(x)
            if nrm == 0.0 or power_share <= 0.0:
                return np.zeros_like(x)
            return x * np.sqrt(power_share) / nrm
        return x
    if target == "irs":
        pivot = x[-1]
        if abs(pivot) < 1e-12:
            return None
        phi = x / pivot
        theta = phi[:-1].conj()
        mags = np.abs(theta)
        theta = np.where(mags > 1.0, theta / np.where(mags > 0, mags, 1.0), theta)
        return theta
    raise ValueError(f"unknown randomization target {target!r}")


def randomize_rank_one(x_opt: np.ndarray, target: str, feasibility, n_samples: int = 200,
                       rng=None, power_share: float | None = None, objective=None) -> np.ndarray:
    """Recover a beamforming vector from a relaxed PSD optimum.

    Near rank-one inputs short-circuit to sqrt(lambda_1) * v_1 (post-processed
    for the target but not re-checked). Otherwise Gaussian candidates
    x = V Lambda^{1/2} e are drawn, post-processed (bs/relay: rescaled to
    `power_share`; irs: pivot-normalized then modulus-clipped), filtered by
    `feasibility`, and ranked by `objective` (higher is better).
    """
    rng = np.random.default_rng(rng)
    w, v = _psd_eig(np.asarray(x_opt, dtype=complex))
    lam1 = w[-1]
    if lam1 <= 0.0:
        raise NoFeasibleCandidate("relaxed optimum is numerically zero")
    top = np.sqrt(lam1) * v[:, -1]
    if len(w) == 1 or w[-2] / lam1 <= _NEAR_RANK_ONE:
        out = _postprocess(top, target, power_share=None if target in ("bs", "relay") else power_share)
        if out is not None:
            return out
    sqw = np.sqrt(w)
    best, best_val = None, -np.inf
    candidates = [top]
    candidates.extend(v @ (sqw * _complex_gaussian(rng, len(w))) for _ in range(n_samples))
    for cand in candidates:
        cand = _postprocess(cand, target, power_share)
        if cand is None or not feasibility(cand):
            continue
        val = objective(cand) if objective is not None else 0.0
        if val > best_val or best is None:
            best, best_val = cand, val
    if best is None:
        raise NoFeasibleCandidate(f"no feasible candidate among {n_samples + 1} draws")
    return best


def _recover_tuple(lifted, shares, rng, n_samples, joint_feasible, joint_objective):
    """Joint randomization across users: one candidate tuple per draw."""
    pools = []
    for x_opt, share in zip(lifted, shares):
        w, v = _psd_eig(x_opt)
        if w[-1] <= 0.0:
            return None
        sqw = np.sqrt(w)
        pool = [np.sqrt(w[-1]) * v[:, -1]]
        pool.extend(v @ (sqw * _complex_gaussian(rng, len(w))) for _ in range(n_samples))
        pool = [_postprocess(x, "bs", share) for x in pool]
        if any(p is None for p in pool):
            return None
        pools.append(pool)
    best, best_val = None, -np.inf
    for i in range(n_samples + 1):
        cand = [pool[i] for pool in pools]
        if not joint_feasible(cand):
            continue
        val = joint_objective(cand)
        if val > best_val or best is None:
            best, best_val = cand, val
    return best


# ---------------------------------------------------------------------------
# SCA drivers
# ---------------------------------------------------------------------------

def _usable(sol) -> bool:
    return sol.status in (SolveStatus.OPTIMAL, SolveStatus.MAX_ITER) and np.isfinite(sol.objective_value)


def optimize_bs(ch: ChannelSet, state, params: SystemParams, cfg, gamma_th: float, rng,
                phase2_theta=None, objective_fn=None, relay_sinr_fn=None) -> SubproblemSolution:
    """BS beamforming stage: lifted inner AO over users, then joint recovery.

    Returns a SubproblemSolution whose update is the candidate G (watts) or
    None when recovery failed; `infeasible` is set when the SDP itself is
    infeasible at `gamma_th` (restoration trigger).
    """
    K = ch.K
    hpp, Hpp = _bs_data(ch, state.theta, params)
    theta2 = state.theta if phase2_theta is None else phase2_theta
    eff2 = effective_channels(ch, theta2)
    gamma2 = phase_sinrs(eff2.h_r, state.F, np.asarray(params.sigma_k2))
    c1 = 1.0 + gamma2

    G_lift = [_outer(state.G[:, k]) / params.p_bs_max for k in range(K)]
    surrogate = -np.inf
    iterations = 0
    for _ in range(cfg.sca_inner_iters):
        prev = surrogate
        # An infeasible per-user instance does not abort the sweep: another
        # user's update can unblock it (less relay interference). Only a full
        # sweep of infeasible instances counts as an infeasible stage.
        all_infeasible = True
        for k_active in range(K):
            z1, zR = bs_local_points(hpp, Hpp, G_lift)
            problem, handles = build_bs_sdp(k_active, hpp, Hpp, G_lift, c1, z1, zR, gamma_th)
            sol = solve(problem, _SOLVER_OPTS)
            iterations += sol.iterations
            if sol.status is SolveStatus.INFEASIBLE:
                continue
            all_infeasible = False
            if not _usable(sol):
                continue
            G_lift[k_active] = complex_from_embedding(sol.psd_values[handles.g_block])
            surrogate = sol.objective_value
        if all_infeasible:
            return SubproblemSolution(None, surrogate, SolveStatus.INFEASIBLE, infeasible=True,
                                      solver_iterations=iterations)
        if surrogate - prev < cfg.sca_tol and np.isfinite(prev):
            break

    if not np.isfinite(surrogate):
        return SubproblemSolution(None, surrogate, SolveStatus.NUMERICAL_FAILURE,
                                  solver_iterations=iterations)

    shares = np.array([max(float(np.real(np.trace(Gk))), 0.0) for Gk in G_lift])
    total = shares.sum()
    if total > 1.0:
        shares /= total
    shares *= params.p_bs_max

    tol = 1e-6 * max(1.0, gamma_th)

    def joint_feasible(vecs):
        G = np.stack(vecs, axis=1)
        return bool(np.all(relay_sinr_fn(G) >= gamma_th - tol)) if relay_sinr_fn else True

    def joint_objective(vecs):
        return objective_fn(np.stack(vecs, axis=1)) if objective_fn else 0.0

    best = _recover_tuple(G_lift, shares, rng, cfg.randomization_samples, joint_feasible, joint_objective)
    update = np.stack(best, axis=1) if best is not None else None
    z1, zR = bs_local_points(hpp, Hpp, G_lift)
    return SubproblemSolution(update, surrogate, SolveStatus.OPTIMAL if update is not None else SolveStatus.NUMERICAL_FAILURE,
                              slacks={"z1": z1, "zR": zR}, solver_iterations=iterations)


def optimize_relay(ch: ChannelSet, state, params: SystemParams, cfg, rng,
                   phase2_theta=None, objective_fn=None) -> SubproblemSolution:
    """Relay beamforming stage: joint lifted SCA then per-user recovery."""
    K = ch.K
    theta2 = state.theta if phase2_theta is None else phase2_theta
    hpp_r = _relay_data(ch, theta2, params)
    eff1 = effective_channels(ch, state.theta)
    gamma1 = phase_sinrs(eff1.h_bs, state.G, np.asarray(params.sigma_k2))
    c2 = 1.0 + gamma1

    F_lift = [_outer(state.F[:, k]) / params.p_r_max for k in range(K)]
    surrogate = -np.inf
    iterations = 0
    for _ in range(cfg.sca_inner_iters):
        prev = surrogate
        z2 = relay_local_points(hpp_r, F_lift)
        problem, handles = build_relay_sdp(hpp_r, c2, z2)
        sol = solve(problem, _SOLVER_OPTS)
        iterations += sol.iterations
        if not _usable(sol):
            status = SolveStatus.NUMERICAL_FAILURE if sol.status is SolveStatus.INFEASIBLE else sol.status
            if surrogate == -np.inf:
                return SubproblemSolution(None, surrogate, status, solver_iterations=iterations)
            break
        F_lift = [complex_from_embedding(sol.psd_values[blk]) for blk in handles.f_blocks]
        surrogate = sol.objective_value
        if surrogate - prev < cfg.sca_tol and np.isfinite(prev):
            break

    shares = np.array([max(float(np.real(np.trace(Fk))), 0.0) for Fk in F_lift])
    total = shares.sum()
    if total > 1.0:
        shares /= total
    shares *= params.p_r_max

    def joint_objective(vecs):
        return objective_fn(np.stack(vecs, axis=1)) if objective_fn else 0.0

    best = _recover_tuple(F_lift, shares, rng, cfg.randomization_samples, lambda vecs: True, joint_objective)
    update = np.stack(best, axis=1) if best is not None else None
    return SubproblemSolution(update, surrogate, SolveStatus.OPTIMAL if update is not None else SolveStatus.NUMERICAL_FAILURE,
                              slacks={"z2": relay_local_points(hpp_r, F_lift)}, solver_iterations=iterations)


def optimize_irs(ch: ChannelSet, state, params: SystemParams, cfg, gamma_th: float, rng,
                 phase2_with_irs: bool = True, objective_fn=None, relay_sinr_fn=None) -> SubproblemSolution:
    """IRS reflection stage: lifted SCA on Phi then Gaussian randomization."""
    data = _irs_data(ch, state.G, state.F, params, phase2_with_irs)
    phi = np.concatenate([state.theta, [1.0]]).conj()
    Phi = _outer(phi)
    surrogate = -np.inf
    iterations = 0
    for _ in range(cfg.sca_inner_iters):
        prev = surrogate
        z1, z2, zR = irs_local_points(data, Phi)
        problem, handles = build_irs_sdp(data, z1, z2, zR, gamma_th, ch.N)
        sol = solve(problem, _SOLVER_OPTS)
        iterations += sol.iterations
        if sol.status is SolveStatus.INFEASIBLE:
            return SubproblemSolution(None, surrogate, sol.status, infeasible=True,
                                      solver_iterations=iterations)
        if not _usable(sol):
            if surrogate == -np.inf:
                return SubproblemSolution(None, surrogate, sol.status, solver_iterations=iterations)
            break
        Phi = complex_from_embedding(sol.psd_values[handles.phi_block])
        surrogate = sol.objective_value
        if surrogate - prev < cfg.sca_tol and np.isfinite(prev):
            break

    if not np.isfinite(surrogate):
        return SubproblemSolution(None, surrogate, SolveStatus.NUMERICAL_FAILURE,
                                  solver_iterations=iterations)

    tol = 1e-6 * max(1.0, gamma_th)
    feas = (lambda theta: bool(np.all(relay_sinr_fn(theta) >= gamma_th - tol))) if relay_sinr_fn else (lambda theta: True)
    try:
        theta_new = randomize_rank_one(Phi, "irs", feas, n_samples=cfg.randomization_samples,
                                       rng=rng, objective=objective_fn)
    except NoFeasibleCandidate:
        return SubproblemSolution(None, surrogate, SolveStatus.NUMERICAL_FAILURE,
                                  solver_iterations=iterations)
    z1, z2, zR = irs_local_points(data, Phi)
    return SubproblemSolution(theta_new, surrogate, SolveStatus.OPTIMAL,
                              slacks={"z1": z1, "z2": z2, "zR": zR}, solver_iterations=iterations)
