"""Effective channels, per-phase SINRs, and the sum-rate objective.

Single source of truth that optimizers and baselines are evaluated against;
everything here is a pure function of (channels, beamforming state, params).
The two-phase protocol carries a 1/2 pre-log in the sum rate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channels import ChannelSet, DimensionError

__all__ = [
    "NegativeSINR",
    "BeamformingState",
    "SystemParams",
    "SINRReport",
    "EffectiveChannels",
    "effective_channels",
    "lifted_channel_matrices",
    "lifted_relay_link",
    "relay_mf_sinr",
    "phase_sinrs",
    "sinr_report",
    "sum_rate",
    "check_state",
]

STATE_TOL = 1e-9


class NegativeSINR(ValueError):
    """SINRs entering the rate formula must be nonnegative."""


@dataclass(frozen=True)
class SystemParams:
    """Power budgets, noise variances, and the relay decoding threshold."""

    p_bs_max: float = 10e-3
    p_r_max: float = 10e-3
    sigma_k2: tuple[float, ...] = ()
    sigma_r2: float = 1e-11
    gamma_r_th: float = 10.0

    def __post_init__(self):
        if self.p_bs_max <= 0 or self.p_r_max <= 0 or self.sigma_r2 <= 0:
            raise ValueError("powers and noise variances must be positive")
        if any(s <= 0 for s in self.sigma_k2):
            raise ValueError("user noise variances must be positive")
        if self.gamma_r_th <= 0:
            raise ValueError("gamma_r_th must be positive")

    @staticmethod
    def for_users(K: int, **kwargs) -> "SystemParams":
        kwargs.setdefault("sigma_k2", tuple([1e-11] * K))
        return SystemParams(**kwargs)


@dataclass(frozen=True)
class BeamformingState:
    """BS beamformers G (M x K), relay beamformers F (L x K), reflection theta (N,)."""

    G: np.ndarray
    F: np.ndarray
    theta: np.ndarray


def check_state(state: BeamformingState, params: SystemParams, tol: float = STATE_TOL) -> None:
    """Raise if power or reflection-modulus invariants are violated."""
    p_bs = float(np.sum(np.abs(state.G) ** 2))
    p_r = float(np.sum(np.abs(state.F) ** 2))
    if p_bs > params.p_bs_max + tol * max(1.0, params.p_bs_max):
        raise ValueError(f"BS power {p_bs:.6e} exceeds budget {params.p_bs_max:.6e}")
    if p_r > params.p_r_max + tol * max(1.0, params.p_r_max):
        raise ValueError(f"relay power {p_r:.6e} exceeds budget {params.p_r_max:.6e}")
    if state.theta.size and np.max(np.abs(state.theta)) > 1.0 + tol:
        raise ValueError("reflection coefficient modulus exceeds 1")


@dataclass(frozen=True)
class EffectiveChannels:
    """Direct-plus-cascade channels for one reflection setting."""

    h_bs: np.ndarray  # (K, M) BS -> user k
    H_bs_r: np.ndarray  # (L, M) BS -> relay
    h_r: np.ndarray  # (K, L) relay -> user k


@dataclass(frozen=True)
class SINRReport:
    """Per-user SINRs of both phases, relay decoding SINRs, and the sum rate."""

    gamma1: np.ndarray
    gamma2: np.ndarray
    gammaR: np.ndarray
    gamma: np.ndarray
    sum_rate: float


def effective_channels(ch: ChannelSet, theta) -> EffectiveChannels:
    """Cascaded-plus-direct channels for reflection vector theta."""
    theta = np.asarray(theta, dtype=complex).reshape(-1)
    if theta.shape[0] != ch.N:
        raise DimensionError(f"theta has {theta.shape[0]} entries, channels have N={ch.N}")
    # h_irs Theta = theta elementwise on the row vector.
    h_bs = (ch.h_irs * theta[None, :]) @ ch.H_bs_irs + ch.h_bs
    H_bs_r = ch.H_r_irs.conj().T @ (theta[:, None] * ch.H_bs_irs) + ch.H_bs_r
    h_r = (ch.h_irs * theta[None, :]) @ ch.H_r_irs + ch.h_r
    return EffectiveChannels(h_bs, H_bs_r, h_r)


def lifted_channel_matrices(ch: ChannelSet, k: int):
    """Per-user lifting that moves theta out of the cascade.

    Returns (H_b_i_k, H_r_i_k) of shapes (N+1, M) and (N+1, L) such that for
    phi = [theta, 1]^H, phi^H @ H_b_i_k equals the effective BS->user channel
    and phi^H @ H_r_i_k the effective relay->user channel.
    """
    if not 0 <= k < ch.K:
        raise DimensionError(f"user index {k} out of range for K={ch.K}")
    h_b_i = np.vstack([ch.h_irs[k][:, None] * ch.H_bs_irs, ch.h_bs[k][None, :]])
    h_r_i = np.vstack([ch.h_irs[k][:, None] * ch.H_r_irs, ch.h_r[k][None, :]])
    return h_b_i, h_r_i


def lifted_relay_link(ch: ChannelSet) -> np.ndarray:
    """Lifting of the BS->relay link: tensor T of shape (N+1, L, M).

    Row l of the effective BS->relay channel equals phi^H @ T[:, l, :], so the
    relay filter weight for beamformer g is alpha = (phi^H @ (T @ g)) over l.
    """
    T = np.empty((ch.N + 1, ch.L, ch.M), dtype=complex)
    # T[n, l, :] = conj(H_r_irs[n, l]) * H_bs_irs[n, :]
    T[: ch.N] = ch.H_r_irs.conj()[:, :, None] * ch.H_bs_irs[:, None, :]
    T[ch.N] = ch.H_bs_r
    return T


def phase_sinrs(h_eff: np.ndarray, B: np.ndarray, sigma2: np.ndarray) -> np.ndarray:
    # h_eff: (K, n), B: (n, K) beamformer columns;
    # gamma_k = |h_k b_k|^2 / (sum_{j != k} |h_k b_j|^2 + sigma_k^2).
    cross = np.abs(h_eff @ B) ** 2  # (K, K): cross[k, j] = |h_k b_j|^2
    sig = np.diag(cross)
    interf = cross.sum(axis=1) - sig
    return sig / (interf + sigma2)


def relay_mf_sinr(ch: ChannelSet, G: np.ndarray, theta, params: SystemParams) -> np.ndarray:
    """Matched-filter decoding SINRs at the relay for all users.

    gamma_{R,k} = ||a_k||^4 / (sum_{j != k} |a_k^H a_j|^2 + sigma_R^2 ||a_k||^2)
    with filter weights a_k = H'_bs_r @ g_k; zero-norm weights yield 0.
    """
    eff = effective_channels(ch, theta)
    A = eff.H_bs_r @ G  # (L, K), column k = alpha_k
    gram = A.conj().T @ A  # gram[k, j] = alpha_k^H alpha_j
    norms2 = np.abs(np.diag(gram))
    cross = np.abs(gram) ** 2
    interf = cross.sum(axis=1) - np.diag(cross)
    denom = interf + params.sigma_r2 * norms2
    out = np.zeros(ch.K)
    nz = denom > 0
    out[nz] = norms2[nz] ** 2 / denom[nz]
    return out


def sum_rate(gammas) -> float:
    """Half-prelog sum rate in bits/s/Hz."""
    g = np.asarray(gammas, dtype=float)
    if np.any(g < 0):
        raise NegativeSINR("negative SINR in rate computation")
    return float(0.5 * np.sum(np.log2(1.0 + g)))


def sinr_report(ch: ChannelSet, state: BeamformingState, params: SystemParams,
                phase2_theta=None) -> SINRReport:
    """Evaluate both phases, MRC combining, and the sum rate.

    `phase2_theta` overrides the reflection used in the second phase (the
    Independent benchmark turns the IRS off after the first phase); default
    is the state's theta in both phases.
    """
    sigma2 = np.asarray(params.sigma_k2, dtype=float)
    if sigma2.shape[0] != ch.K:
        raise DimensionError(f"params carry {sigma2.shape[0]} noise entries, K={ch.K}")
    eff1 = effective_channels(ch, state.theta)
    eff2 = eff1 if phase2_theta is None else effective_channels(ch, phase2_theta)
    gamma1 = phase_sinrs(eff1.h_bs, state.G, sigma2)
    gamma2 = phase_sinrs(eff2.h_r, state.F, sigma2)
    gammaR = relay_mf_sinr(ch, state.G, state.theta, params)
    gamma = gamma1 + gamma2
    return SINRReport(gamma1, gamma2, gammaR, gamma, sum_rate(gamma))
