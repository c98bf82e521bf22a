"""Topology, large-scale path gains, and Rayleigh channel realizations.

All randomness is drawn from seeded generators; a (topology, params, dims,
seed) tuple determines a ChannelSet bit-exactly. Each of the six channel
matrices uses its own child stream, so realizations of the non-IRS links do
not depend on the number of IRS elements.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "NonPositiveDistance",
    "DimensionError",
    "Topology",
    "LargeScaleParams",
    "ChannelSet",
    "path_gain",
    "place_users",
    "draw_channels",
]


class NonPositiveDistance(ValueError):
    """Distances and reference distances must be positive."""


class DimensionError(ValueError):
    """Inconsistent antenna/user dimensions."""


@dataclass(frozen=True)
class Topology:
    """2-D node placement in meters."""

    bs_pos: tuple[float, float] = (0.0, 0.0)
    irs_pos: tuple[float, float] = (100.0, 50.0)
    relay_pos: tuple[float, float] = (100.0, -50.0)
    user_positions: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        # Positivity is required for every pair that forms a link; users never
        # link to each other, so coincident users (zero-radius disk) are fine.
        infra = [self.bs_pos, self.irs_pos, self.relay_pos]
        for i, a in enumerate(infra):
            for b in infra[i + 1 :]:
                if np.hypot(a[0] - b[0], a[1] - b[1]) <= 0.0:
                    raise NonPositiveDistance("coincident infrastructure nodes")
        for u in self.user_positions:
            for a in infra:
                if np.hypot(a[0] - u[0], a[1] - u[1]) <= 0.0:
                    raise NonPositiveDistance("user coincides with an infrastructure node")

    def with_users(self, positions) -> "Topology":
        users = tuple((float(x), float(y)) for x, y in positions)
        return Topology(self.bs_pos, self.irs_pos, self.relay_pos, users)


@dataclass(frozen=True)
class LargeScaleParams:
    """Parameters of the kappa * (d/d0)^(-rho) path-gain law per link class."""

    d0: float = 1.0
    kappa_direct_and_relay: float = 1e-4
    kappa_irs: float = 10.0 ** (-0.5)
    rho_direct: float = 3.5
    rho_assisted: float = 2.0

    def __post_init__(self):
        if self.d0 <= 0 or self.kappa_direct_and_relay <= 0 or self.kappa_irs <= 0:
            raise ValueError("d0 and kappa constants must be positive")
        if self.rho_direct <= 0 or self.rho_assisted <= 0:
            raise ValueError("path-loss exponents must be positive")


@dataclass(frozen=True)
class ChannelSet:
    """One realization of the six baseband channels.

    Row-vector channels for the K users are stacked: h_bs[k] is the 1 x M
    BS->user channel, h_r[k] the 1 x L relay->user channel, h_irs[k] the
    1 x N IRS->user channel.
    """

    H_bs_r: np.ndarray  # (L, M)
    H_bs_irs: np.ndarray  # (N, M)
    h_bs: np.ndarray  # (K, M)
    H_r_irs: np.ndarray  # (N, L)
    h_r: np.ndarray  # (K, L)
    h_irs: np.ndarray  # (K, N)

    @property
    def M(self) -> int:
        return self.H_bs_r.shape[1]

    @property
    def L(self) -> int:
        return self.H_bs_r.shape[0]

    @property
    def N(self) -> int:
        return self.H_bs_irs.shape[0]

    @property
    def K(self) -> int:
        return self.h_bs.shape[0]

    def checksum(self) -> float:
        """Order-stable scalar fingerprint used by pairing tests."""
        return float(
            sum(np.abs(m).sum() for m in (self.H_bs_r, self.H_bs_irs, self.h_bs, self.H_r_irs, self.h_r, self.h_irs))
        )


def path_gain(d: float, kappa: float, rho: float, d0: float = 1.0) -> float:
    """Linear large-scale power gain kappa * (d/d0)^(-rho)."""
    if d <= 0.0 or d0 <= 0.0:
        raise NonPositiveDistance(f"d={d}, d0={d0}")
    return float(kappa * (d / d0) ** (-rho))


def place_users(center, radius: float, K: int, seed) -> tuple[tuple[float, float], ...]:
    """K points uniform over a disk; deterministic given the seed."""
    if K < 1:
        raise ValueError("K must be >= 1")
    if radius < 0:
        raise ValueError("radius must be >= 0")
    rng = np.random.default_rng(seed)
    r = radius * np.sqrt(rng.uniform(size=K))
    ang = rng.uniform(0.0, 2.0 * np.pi, size=K)
    cx, cy = center
    return tuple((float(cx + ri * np.cos(a)), float(cy + ri * np.sin(a))) for ri, a in zip(r, ang))


def _dist(a, b) -> float:
    return float(np.hypot(a[0] - b[0], a[1] - b[1]))


def _cn(rng, shape) -> np.ndarray:
    # CN(0, 1): unit total variance split between real and imaginary parts.
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def draw_channels(topology: Topology, params: LargeScaleParams, dims, seed) -> ChannelSet:
    """Draw one quasi-static realization of all six channels.

    `dims` is a mapping with keys M, L, N, K. Each matrix entry is
    sqrt(path gain) * CN(0,1); link classes: the BS->user direct link uses
    (kappa_direct_and_relay, rho_direct), BS->relay and relay->user use
    (kappa_direct_and_relay, rho_assisted), IRS links use
    (kappa_irs, rho_assisted).
    """
    M, L, N, K = (int(dims[k]) for k in ("M", "L", "N", "K"))
    if min(M, L, N, K) < 1:
        raise DimensionError(f"dims must be positive, got {dims}")
    if K > min(M, L):
        raise DimensionError(f"K={K} exceeds min(M, L)={min(M, L)}")
    if len(topology.user_positions) != K:
        raise DimensionError(f"topology has {len(topology.user_positions)} users, dims say K={K}")

    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(6)]
    users = topology.user_positions

    g_bs_r = path_gain(_dist(topology.bs_pos, topology.relay_pos), params.kappa_direct_and_relay, params.rho_assisted, params.d0)
    g_bs_irs = path_gain(_dist(topology.bs_pos, topology.irs_pos), params.kappa_irs, params.rho_assisted, params.d0)
    g_r_irs = path_gain(_dist(topology.relay_pos, topology.irs_pos), params.kappa_irs, params.rho_assisted, params.d0)
    g_bs_k = [path_gain(_dist(topology.bs_pos, u), params.kappa_direct_and_relay, params.rho_direct, params.d0) for u in users]
    g_r_k = [path_gain(_dist(topology.relay_pos, u), params.kappa_direct_and_relay, params.rho_assisted, params.d0) for u in users]
    g_irs_k = [path_gain(_dist(topology.irs_pos, u), params.kappa_irs, params.rho_assisted, params.d0) for u in users]

    H_bs_r = np.sqrt(g_bs_r) * _cn(streams[0], (L, M))
    H_bs_irs = np.sqrt(g_bs_irs) * _cn(streams[1], (N, M))
    h_bs = np.sqrt(np.array(g_bs_k))[:, None] * _cn(streams[2], (K, M))
    H_r_irs = np.sqrt(g_r_irs) * _cn(streams[3], (N, L))
    h_r = np.sqrt(np.array(g_r_k))[:, None] * _cn(streams[4], (K, L))
    h_irs = np.sqrt(np.array(g_irs_k))[:, None] * _cn(streams[5], (K, N))
    return ChannelSet(H_bs_r, H_bs_irs, h_bs, H_r_irs, h_r, h_irs)
