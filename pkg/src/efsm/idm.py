"""Intelligent Driver Model acceleration law."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import CollisionStateError

__all__ = ["IdmParams", "idm_accel", "idm_accel_free"]


@dataclass(frozen=True)
class IdmParams:
    """IDM controller parameters.

    a_max : maximum acceleration [m/s^2]
    v0 : desired velocity [m/s]
    s0 : minimum gap [m]
    T : desired time headway [s]
    b_comf : comfortable deceleration [m/s^2]
    delta_exp : velocity exponent (standard value 4)
    """

    a_max: float
    v0: float
    s0: float
    T: float
    b_comf: float
    delta_exp: float = 4.0

    def __post_init__(self) -> None:
        for name in ("a_max", "v0", "s0", "T", "b_comf", "delta_exp"):
            value = getattr(self, name)
            if not (value > 0.0) or not math.isfinite(value):
                raise ValueError(f"IdmParams.{name} must be positive, got {value!r}")


def idm_accel(p: IdmParams, v: float, dv: float, s: float, bounds=None) -> float:
    """IDM acceleration for speed v, closing speed dv = v - v_leader, gap s.

    The desired gap s* = s0 + v*T + v*dv / (2*sqrt(a_max*b_comf)) is floored
    at 0 so a fast-opening gap cannot produce a negative desired distance.
    When bounds (lo, hi) are given the result is clamped into them.
    """
    if s <= 0.0:
        raise CollisionStateError(f"gap must be positive, got {s}")
    s_star = p.s0 + v * p.T + v * dv / (2.0 * math.sqrt(p.a_max * p.b_comf))
    s_star = max(0.0, s_star)
    a = p.a_max * (1.0 - (v / p.v0) ** p.delta_exp - (s_star / s) ** 2)
    if bounds is not None:
        a = min(max(a, bounds[0]), bounds[1])
    return a


def idm_accel_free(p: IdmParams, v: float) -> float:
    """Free-road IDM acceleration (no leader interaction term)."""
    return p.a_max * (1.0 - (v / p.v0) ** p.delta_exp)
