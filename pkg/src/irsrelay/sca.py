"""First-order Taylor lower bounds used by the successive convex approximation.

The bounded functions are convex over the positive orthant, so their tangent
planes are global underestimators:

    u(S, I)  = log2(C + 1/(S*I))            rate with a fixed-phase constant C
    v(S, I)  = 1/(S*I)                      relay decoding SINR
    u3(z)    = log2(1 + 1/(S1*I1) + 1/(S2*I2))   two-phase combined rate
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "NonPositiveLocalPoint",
    "SlackLocalPoint",
    "AffineBound",
    "AffineBound4",
    "u_value",
    "v_value",
    "u3_value",
    "taylor_bound_u",
    "taylor_bound_v",
    "taylor_bound_u3",
]

_LN2 = np.log(2.0)


class NonPositiveLocalPoint(ValueError):
    """Taylor expansion points must be strictly positive."""


@dataclass(frozen=True)
class SlackLocalPoint:
    """Positive (S, I) pair at which a bound is expanded."""

    s: float
    i: float

    def __post_init__(self):
        if not (self.s > 0 and np.isfinite(self.s) and self.i > 0 and np.isfinite(self.i)):
            raise NonPositiveLocalPoint(f"local point ({self.s}, {self.i}) must be positive and finite")


@dataclass(frozen=True)
class AffineBound:
    """constant + coeff_s*(S - s_loc) + coeff_i*(I - i_loc)."""

    constant: float
    coeff_s: float
    coeff_i: float
    s_loc: float
    i_loc: float

    def __call__(self, s: float, i: float) -> float:
        return self.constant + self.coeff_s * (s - self.s_loc) + self.coeff_i * (i - self.i_loc)


@dataclass(frozen=True)
class AffineBound4:
    """Tangent plane of the two-phase rate in (S1, I1, S2, I2)."""

    constant: float
    coeffs: tuple[float, float, float, float]
    locs: tuple[float, float, float, float]

    def __call__(self, z) -> float:
        return self.constant + sum(c * (zi - li) for c, zi, li in zip(self.coeffs, z, self.locs))


def u_value(s: float, i: float, c: float) -> float:
    return float(np.log2(c + 1.0 / (s * i)))


def v_value(s: float, i: float) -> float:
    return 1.0 / (s * i)


def u3_value(s1: float, i1: float, s2: float, i2: float) -> float:
    return float(np.log2(1.0 + 1.0 / (s1 * i1) + 1.0 / (s2 * i2)))


def taylor_bound_u(s_loc: float, i_loc: float, c: float) -> AffineBound:
    """Tangent of log2(C + 1/(S*I)) at (s_loc, i_loc); C >= 1."""
    loc = SlackLocalPoint(s_loc, i_loc)
    if c < 1.0:
        raise ValueError(f"C must be >= 1, got {c}")
    p = 1.0 / (loc.s * loc.i)
    denom = (c + p) * _LN2
    return AffineBound(
        constant=u_value(loc.s, loc.i, c),
        coeff_s=-p / (loc.s * denom),
        coeff_i=-p / (loc.i * denom),
        s_loc=loc.s,
        i_loc=loc.i,
    )


def taylor_bound_v(s_loc: float, i_loc: float) -> AffineBound:
    """Tangent of 1/(S*I) at (s_loc, i_loc)."""
    loc = SlackLocalPoint(s_loc, i_loc)
    p = 1.0 / (loc.s * loc.i)
    return AffineBound(
        constant=p,
        coeff_s=-p / loc.s,
        coeff_i=-p / loc.i,
        s_loc=loc.s,
        i_loc=loc.i,
    )


def taylor_bound_u3(z1: SlackLocalPoint, z2: SlackLocalPoint) -> AffineBound4:
    """Tangent of log2(1 + 1/(S1*I1) + 1/(S2*I2)) at (z1, z2)."""
    p1 = 1.0 / (z1.s * z1.i)
    p2 = 1.0 / (z2.s * z2.i)
    denom = (1.0 + p1 + p2) * _LN2
    return AffineBound4(
        constant=u3_value(z1.s, z1.i, z2.s, z2.i),
        coeffs=(
            -p1 / (z1.s * denom),
            -p1 / (z1.i * denom),
            -p2 / (z2.s * denom),
            -p2 / (z2.i * denom),
        ),
        locs=(z1.s, z1.i, z2.s, z2.i),
    )
