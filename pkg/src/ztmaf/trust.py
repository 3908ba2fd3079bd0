"""Trust engine: context plausibility, exponential filtering, convergence.

The filter is T' = alpha*T + (1-alpha)*psi(context). psi blends three
plausibility terms (speed, location, behavior) with trapezoidal falloff:
an error within tolerance costs nothing, twice the tolerance floors the
term at zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

from .domain import ContextVector, Point, TrustState, distance


@dataclass(frozen=True)
class TrustParams:
    alpha: float = 0.92
    theta: float = 0.65
    weights: Tuple[float, float, float] = (0.25, 0.25, 0.5)  # (speed, loc, behavior)
    speed_tol_mps: float = 5.0
    loc_tol_m: float = 50.0

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must be in (0, 1)")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError("theta must be in [0, 1]")
        if any(w < 0 for w in self.weights) or abs(sum(self.weights) - 1.0) > 1e-9:
            raise ValueError("weights must be non-negative and sum to 1")
        if self.speed_tol_mps <= 0 or self.loc_tol_m <= 0:
            raise ValueError("tolerances must be positive")


def _falloff(error: float, tol: float) -> float:
    return min(1.0, max(0.0, 1.0 - max(0.0, error / tol - 1.0)))


def psi(
    ctx: ContextVector,
    expected_speed_mps: float,
    estimated_loc: Point,
    params: TrustParams,
) -> float:
    """Risk-weighted context plausibility in [0, 1]."""
    g_speed = _falloff(abs(ctx.speed_mps - expected_speed_mps), params.speed_tol_mps)
    g_loc = _falloff(distance(ctx.location, estimated_loc), params.loc_tol_m)
    w_s, w_l, w_b = params.weights
    return w_s * g_speed + w_l * g_loc + w_b * ctx.behavior


def update_trust(
    state: TrustState,
    ctx: ContextVector,
    psi_value: float,
    params: TrustParams,
) -> TrustState:
    """Apply one filter step and append to history; returns a new state."""
    if not 0.0 <= psi_value <= 1.0:
        raise ValueError("psi value must be in [0, 1]")
    new_value = params.alpha * state.value + (1.0 - params.alpha) * psi_value
    new_value = min(1.0, max(0.0, new_value))  # guard float rounding at the ends
    new_state = TrustState(
        value=state.value,
        last_update_s=state.last_update_s,
        history=list(state.history),
        history_limit=state.history_limit,
    )
    new_state.record(ctx.timestamp_s, new_value)
    return new_state


def convergence_time(t0: float, psi_star: float, alpha: float, eps: float) -> int:
    """Smallest n with alpha^n * |t0 - psi_star| <= eps under a constant psi.

    Closed form of iterating the filter: T(n) = psi* + alpha^n (T(0) - psi*).
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    if eps <= 0:
        raise ValueError("eps must be positive")
    gap = abs(t0 - psi_star)
    if gap <= eps:
        return 0
    n = max(0, math.ceil(math.log(eps / gap) / math.log(alpha)))
    # settle float edge cases against the defining inequality
    while n > 0 and alpha ** (n - 1) * gap <= eps:
        n -= 1
    while alpha**n * gap > eps:
        n += 1
    return n
