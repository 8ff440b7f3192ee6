"""Optimal time and power allocation for a fixed view selection.

For transmitted view ``v`` with weakest utilizing channel ``h`` the optimal time is

    t_v(lam) = R T ln2 / (B (W0(lam h / (n0 e) - 1/e) + 1))

and the multiplier ``lam`` of the frame budget is chosen so the times fill ``T`` exactly.
Power then makes the decoding constraint tight for the weakest user.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from viewcast.io import get_logger
from viewcast.model import Allocation, Scenario, Selection
from viewcast.numerics import BisectionSpec, bisect, w0_shifted

LOGGER = get_logger(__name__)
LN2 = math.log(2.0)
TIME_RTOL = 1e-12


class AllocationPreconditionError(ValueError):
    """Raised when a transmitted view has no utilizing user."""


@dataclass(frozen=True)
class DualState:
    """Optimal multiplier of the frame budget and the per-view weakest channels."""

    lambda_star: float
    h_min: dict[int, float]

    def to_dict(self) -> dict[str, object]:
        return {
            "lambda_star": self.lambda_star,
            "h_min": {str(g): h for g, h in self.h_min.items()},
        }


def h_min(scenario: Scenario, y_column: npt.ArrayLike) -> float | None:
    """Weakest channel among the users utilizing a view, or None when nobody utilizes it."""
    mask = np.asarray(y_column) != 0
    if not mask.any():
        return None
    return float(scenario.channels[mask].min())


def view_time(scenario: Scenario, h: float, lam: float) -> float:
    """Optimal time for one view at multiplier ``lam``."""
    w = w0_shifted(lam * h / scenario.n0)
    return scenario.R * scenario.T * LN2 / (scenario.B * (w + 1.0))


def total_time_at_lambda(scenario: Scenario, h_mins: Sequence[float], lam: float) -> float:
    """Sum of optimal view times at multiplier ``lam`` over the transmitted views."""
    return sum(view_time(scenario, h, lam) for h in h_mins)


def view_power(scenario: Scenario, h: float, t: float) -> float:
    """Power that makes the decoding constraint tight for channel ``h`` over time ``t``."""
    return scenario.n0 / h * math.expm1(LN2 * scenario.R * scenario.T / (scenario.B * t))


def _lambda_floor(scenario: Scenario, weakest: float) -> float:
    # multiplier at which the weakest view alone takes the whole frame
    w_full = scenario.R * LN2 / scenario.B - 1.0
    d = w_full * math.exp(w_full + 1.0) + 1.0
    return max(d, 1e-300) * scenario.n0 / weakest


def solve_lambda(scenario: Scenario, h_mins: Sequence[float]) -> float:
    """Find the multiplier whose view times sum to ``T`` (two or more views)."""
    T = scenario.T
    lam_lo = _lambda_floor(scenario, min(h_mins))
    lam_hi = lam_lo * 2.0
    while total_time_at_lambda(scenario, h_mins, lam_hi) >= T:
        lam_hi *= 2.0

    def residual(log_lam: float) -> float:
        return total_time_at_lambda(scenario, h_mins, math.exp(log_lam)) - T

    log_lam = bisect(
        residual,
        BisectionSpec(lower=math.log(lam_lo), upper=math.log(lam_hi), tol=TIME_RTOL * T),
    )
    return math.exp(log_lam)


def _view_profile(scenario: Scenario, selection: Selection) -> dict[int, float]:
    profile: dict[int, float] = {}
    for col in selection.transmitted_columns():
        g = scenario.grid.grid_at(int(col))
        h = h_min(scenario, selection.y[:, col])
        if h is None:
            raise AllocationPreconditionError(
                f"view {scenario.grid.value(g)} is transmitted but no user utilizes it"
            )
        profile[g] = h
    return profile


def allocate_profile(
    scenario: Scenario, profile: dict[int, float]
) -> tuple[dict[int, float], dict[int, float], float]:
    """Allocate times and powers for views keyed by grid index with their weakest channels.

    Returns ``(times, powers, lambda_star)``.
    """
    if not profile:
        return {}, {}, 0.0
    views = sorted(profile)
    hs = [profile[g] for g in views]
    if len(views) == 1:
        # the frame budget alone fixes t = T; lambda from stationarity at that point
        times = {views[0]: scenario.T}
        lam = _lambda_floor(scenario, hs[0])
    else:
        lam = solve_lambda(scenario, hs)
        times = {g: view_time(scenario, h, lam) for g, h in zip(views, hs, strict=True)}
    powers = {g: view_power(scenario, profile[g], times[g]) for g in views}
    return times, powers, lam


def optimal_allocation(
    scenario: Scenario, selection: Selection
) -> tuple[Allocation, float, DualState]:
    """Closed-form optimal allocation for a fixed selection; returns (allocation, E_t*, duals)."""
    profile = _view_profile(scenario, selection)
    times, powers, lam = allocate_profile(scenario, profile)
    t = np.zeros(scenario.n_views)
    p = np.zeros(scenario.n_views)
    for g, tv in times.items():
        col = scenario.grid.column(g)
        t[col] = tv
        p[col] = powers[g]
    allocation = Allocation(t=t, p=p)
    e_t = float(np.dot(t, p))
    LOGGER.debug("allocated %d views, lambda*=%.6e, E_t*=%.6e J", len(times), lam, e_t)
    return allocation, e_t, DualState(lambda_star=lam, h_min=profile)


def transmission_energy(scenario: Scenario, selection: Selection) -> float:
    """Minimum transmission energy E_t*(x, y) of a selection."""
    return optimal_allocation(scenario, selection)[1]
