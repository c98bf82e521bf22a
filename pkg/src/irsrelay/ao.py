"""Outer alternating optimization over BS, relay, and IRS beamforming.

Drives the three subproblem stages in sequence, accepts a stage's candidate
only when the true (scheme-consistent) sum rate does not decrease, and
manages the relay-threshold feasibility restoration policy. The four
benchmark schemes differ only in which stages run and in how the second
phase sees the reflection vector.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .channels import ChannelSet
from .subproblems import optimize_bs, optimize_irs, optimize_relay
from .system import (
    BeamformingState,
    SINRReport,
    SystemParams,
    effective_channels,
    relay_mf_sinr,
    sinr_report,
)

__all__ = [
    "Scheme",
    "AOConfig",
    "AOTrace",
    "TrialResult",
    "RestorationExhausted",
    "initialize_state",
    "feasibility_restore",
    "run_ao",
    "run_scheme",
]

GAMMA_TOL = 1e-4
ACCEPT_TOL = 1e-9


class RestorationExhausted(RuntimeError):
    """The relay SINR threshold stayed infeasible after all halvings."""


class Scheme(enum.Enum):
    PROPOSED = "proposed"
    RELAY_ONLY = "relay_only"
    RANDOM_IRS = "random_irs"
    INDEPENDENT = "independent"

    @property
    def optimizes_irs(self) -> bool:
        return self in (Scheme.PROPOSED, Scheme.INDEPENDENT)

    @property
    def phase2_uses_irs(self) -> bool:
        # Independent turns the IRS off in the second phase; RelayOnly has
        # theta = 0 anyway, so the flag only matters for Independent.
        return self is not Scheme.INDEPENDENT


@dataclass(frozen=True)
class AOConfig:
    max_outer_iters: int = 20
    outer_tol: float = 1e-3
    sca_inner_iters: int = 5
    sca_tol: float = 1e-4
    randomization_samples: int = 200
    restore_attempts: int = 4
    stage_order: tuple[str, ...] = ("bs", "relay", "irs")

    def __post_init__(self):
        if min(self.max_outer_iters, self.sca_inner_iters, self.randomization_samples, self.restore_attempts) < 1:
            raise ValueError("AO iteration counts must be positive")
        if self.outer_tol <= 0 or self.sca_tol <= 0:
            raise ValueError("AO tolerances must be positive")
        if sorted(self.stage_order) != ["bs", "irs", "relay"]:
            raise ValueError("stage_order must be a permutation of bs, relay, irs")


@dataclass
class AOTrace:
    """Per-outer-iteration sum rates plus stage-level diagnostics."""

    sum_rates: list = field(default_factory=list)
    stage_records: list = field(default_factory=list)  # (outer, stage, surrogate, accepted, solver iters)
    feasible_per_iter: list = field(default_factory=list)
    initial_sum_rate: float = 0.0
    effective_gamma_th: float = 0.0
    converged: bool = False
    outer_iterations: int = 0


@dataclass
class TrialResult:
    """One (scheme, channel realization) outcome, ready for CSV persistence."""

    scheme: Scheme
    sum_rate: float
    report: SINRReport
    trace: AOTrace
    feasible: bool
    effective_gamma_th: float
    outer_iterations: int
    wall_ms: float
    sweep_var: str | None = None
    sweep_value: int | None = None
    trial: int | None = None


def initialize_state(ch: ChannelSet, params: SystemParams, scheme: Scheme, rng) -> BeamformingState:
    """Matched-filter start at full power; random unit-modulus reflection.

    RelayOnly forces theta = 0 without consuming reflection randomness, which
    keeps its trajectory independent of the IRS-related draws.
    """
    rng = np.random.default_rng(rng)
    if scheme is Scheme.RELAY_ONLY:
        theta = np.zeros(ch.N, dtype=complex)
    else:
        theta = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, ch.N))
    eff1 = effective_channels(ch, theta)
    eff2 = effective_channels(ch, theta if scheme.phase2_uses_irs else np.zeros(ch.N))
    G = eff1.h_bs.conj().T.copy()
    G /= np.linalg.norm(G, axis=0, keepdims=True)
    G *= np.sqrt(params.p_bs_max / ch.K)
    F = eff2.h_r.conj().T.copy()
    F /= np.linalg.norm(F, axis=0, keepdims=True)
    F *= np.sqrt(params.p_r_max / ch.K)
    return BeamformingState(G, F, theta)


def feasibility_restore(probe, gamma_th: float, restore_attempts: int):
    """Halve the relay threshold until `probe` succeeds.

    `probe(th)` returns a result object or None for infeasible. Returns
    (effective threshold, result); raises RestorationExhausted when every
    halving fails.
    """
    th = gamma_th
    result = probe(th)
    if result is not None:
        return th, result
    for _ in range(restore_attempts):
        th = th / 2.0
        result = probe(th)
        if result is not None:
            return th, result
    raise RestorationExhausted(f"relay threshold infeasible down to {th:.4g}")


def _evaluate(ch, state, params, scheme) -> SINRReport:
    phase2 = None if scheme.phase2_uses_irs else np.zeros(ch.N)
    return sinr_report(ch, state, params, phase2_theta=phase2)


def _gamma_feasible(ch, state, params, gamma_th) -> bool:
    g = relay_mf_sinr(ch, state.G, state.theta, params)
    return bool(np.all(g >= gamma_th - GAMMA_TOL))


def run_ao(ch: ChannelSet, params: SystemParams, config: AOConfig, scheme: Scheme, seed):
    """Alternating optimization for one channel realization.

    Returns (state, trace, report). Raises RestorationExhausted when the BS
    stage cannot meet any halved relay threshold.
    """
    ss = np.random.SeedSequence(seed)
    theta_rng, bs_rng, relay_rng, irs_rng = (np.random.default_rng(c) for c in ss.spawn(4))
    state = initialize_state(ch, params, scheme, theta_rng)
    gamma_eff = params.gamma_r_th
    trace = AOTrace(initial_sum_rate=_evaluate(ch, state, params, scheme).sum_rate,
                    effective_gamma_th=gamma_eff)
    current = trace.initial_sum_rate

    def bs_stage(th):
        def objective(G):
            return _evaluate(ch, replace(state, G=G), params, scheme).sum_rate

        def relay_sinrs(G):
            return relay_mf_sinr(ch, G, state.theta, params)

        out = optimize_bs(
            ch, state, params, config, th, bs_rng,
            phase2_theta=None if scheme.phase2_uses_irs else np.zeros(ch.N),
            objective_fn=objective, relay_sinr_fn=relay_sinrs,
        )
        if out.infeasible:
            return None
        return out

    for outer in range(1, config.max_outer_iters + 1):
        incumbent_feasible = _gamma_feasible(ch, state, params, gamma_eff)
        for stage in config.stage_order:
            if stage == "bs":
                if incumbent_feasible:
                    out = bs_stage(gamma_eff)
                    if out is None:
                        # Infeasible SDP despite a feasible incumbent: keep it.
                        trace.stage_records.append((outer, "bs", None, False, 0))
                        continue
                else:
                    # Feasibility first: halve the threshold until the SDP is
                    # solvable and a rank-one candidate passes it.
                    def probe(th):
                        r = bs_stage(th)
                        return r if r is not None and r.update is not None else None

                    gamma_eff, out = feasibility_restore(probe, gamma_eff, config.restore_attempts)
                    trace.effective_gamma_th = gamma_eff
                candidate = out.update
                if candidate is None:
                    trace.stage_records.append((outer, "bs", out.surrogate, False, out.solver_iterations))
                    continue
                cand_state = replace(state, G=candidate)
                val = _evaluate(ch, cand_state, params, scheme).sum_rate
                take = (val >= current - ACCEPT_TOL) or not incumbent_feasible
                if take:
                    state, current = cand_state, val
                    incumbent_feasible = _gamma_feasible(ch, state, params, gamma_eff)
                trace.stage_records.append((outer, "bs", out.surrogate, take, out.solver_iterations))
            elif not incumbent_feasible:
                # Relay and IRS stages wait until the relay threshold holds.
                continue
            elif stage == "relay":
                def objective_f(F):
                    return _evaluate(ch, replace(state, F=F), params, scheme).sum_rate

                out = optimize_relay(
                    ch, state, params, config, relay_rng,
                    phase2_theta=None if scheme.phase2_uses_irs else np.zeros(ch.N),
                    objective_fn=objective_f,
                )
                take = False
                if out.update is not None:
                    cand_state = replace(state, F=out.update)
                    val = _evaluate(ch, cand_state, params, scheme).sum_rate
                    if val >= current - ACCEPT_TOL:
                        state, current, take = cand_state, val, True
                trace.stage_records.append((outer, "relay", out.surrogate, take, out.solver_iterations))
            elif stage == "irs" and scheme.optimizes_irs:
                def objective_t(theta):
                    return _evaluate(ch, replace(state, theta=theta), params, scheme).sum_rate

                def relay_sinrs_t(theta):
                    return relay_mf_sinr(ch, state.G, theta, params)

                out = optimize_irs(
                    ch, state, params, config, gamma_eff, irs_rng,
                    phase2_with_irs=scheme.phase2_uses_irs,
                    objective_fn=objective_t, relay_sinr_fn=relay_sinrs_t,
                )
                take = False
                if out.update is not None:
                    cand_state = replace(state, theta=out.update)
                    val = _evaluate(ch, cand_state, params, scheme).sum_rate
                    if val >= current - ACCEPT_TOL and _gamma_feasible(ch, cand_state, params, gamma_eff):
                        state, current, take = cand_state, val, True
                trace.stage_records.append((outer, "irs", out.surrogate, take, out.solver_iterations))

        # The recorded trace starts at the first threshold-feasible iterate,
        # which keeps the accepted-update monotonicity invariant exact.
        trace.feasible_per_iter.append(incumbent_feasible)
        trace.outer_iterations = outer
        if incumbent_feasible:
            trace.sum_rates.append(current)
        if len(trace.sum_rates) >= 2 and trace.sum_rates[-1] - trace.sum_rates[-2] < config.outer_tol:
            trace.converged = True
            break

    if not _gamma_feasible(ch, state, params, gamma_eff):
        err = RestorationExhausted("final state violates the effective relay threshold")
        err.trace = trace
        raise err
    report = _evaluate(ch, state, params, scheme)
    return state, trace, report


def run_scheme(scheme: Scheme, ch: ChannelSet, params: SystemParams, config: AOConfig, seed) -> TrialResult:
    """Run one scheme on one realization; failures yield an infeasible result."""
    t0 = time.perf_counter()
    try:
        state, trace, report = run_ao(ch, params, config, scheme, seed)
        feasible = True
        sum_rate = report.sum_rate
    except RestorationExhausted as err:
        trace = getattr(err, "trace", AOTrace())
        report = None
        feasible = False
        sum_rate = 0.0
    wall_ms = (time.perf_counter() - t0) * 1e3
    return TrialResult(
        scheme=scheme,
        sum_rate=sum_rate,
        report=report,
        trace=trace,
        feasible=feasible,
        effective_gamma_th=trace.effective_gamma_th,
        outer_iterations=trace.outer_iterations,
        wall_ms=wall_ms,
    )
