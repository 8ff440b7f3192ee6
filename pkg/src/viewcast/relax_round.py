"""Relax-and-round heuristic: solve the continuous relaxation once and round per user."""

from __future__ import annotations

import time

import numpy as np
import numpy.typing as npt

from viewcast.convex_core import BarrierSettings, build_program, solve_program
from viewcast.io import get_logger
from viewcast.model import Scenario, ShapeError, normalize_selection, reference_windows
from viewcast.solution import Solution, assemble_solution

LOGGER = get_logger(__name__)
BOUND_SLACK = 1e-6
SUM_SLACK = 1e-6


class RoundingError(RuntimeError):
    """Raised when a fractional utilization cannot be rounded to a feasible one."""


def _window_argmax(
    values: npt.NDArray[np.float64], window: tuple[int, ...], r: int, first: int
) -> int:
    # highest value; ties go to the view nearest the request, then the smaller index
    return min(window, key=lambda g: (-values[g - first], abs(g - r), g))


def _check_window_sums(
    row: npt.NDArray[np.float64],
    own: float,
    left: tuple[int, ...],
    right: tuple[int, ...],
    first: int,
    user: int,
) -> None:
    for name, window in (("left", left), ("right", right)):
        total = own + sum(row[g - first] for g in window)
        if abs(total - 1.0) > SUM_SLACK:
            raise RoundingError(
                f"user {user}: request plus {name} window sums to {total:.9g}, expected 1"
            )


def round_y(scenario: Scenario, y_fractional: npt.ArrayLike) -> npt.NDArray[np.int8]:
    """Round a fractional utilization matrix to a binary one satisfying the reference equalities."""
    y = np.asarray(y_fractional, dtype=float)
    expected = (scenario.K, scenario.n_views)
    if y.shape != expected:
        raise ShapeError(f"fractional y has shape {y.shape}, expected {expected}")
    if np.any(y < -BOUND_SLACK) or np.any(y > 1.0 + BOUND_SLACK):
        raise RoundingError("fractional y has entries outside [0, 1]")

    grid = scenario.grid
    first = grid.first
    rounded = np.zeros(expected, dtype=np.int8)
    for k, r in enumerate(scenario.requests):
        row = y[k]
        left, right = reference_windows(grid, r)
        own = row[r - first]
        if left and right:
            _check_window_sums(row, own, left, right, first, k)
        others = [row[g - first] for g in (*left, *right)]
        if all(own > value for value in others):
            rounded[k, r - first] = 1
            continue
        if not left or not right:
            raise RoundingError(
                f"user {k} requests boundary view {grid.value(r):g} but is not served directly"
            )
        rounded[k, _window_argmax(row, left, r, first) - first] = 1
        rounded[k, _window_argmax(row, right, r, first) - first] = 1
    return rounded


def solve_relax_round(scenario: Scenario, *, settings: BarrierSettings | None = None) -> Solution:
    """Relax, round, then allocate the rounded selection in closed form."""
    started = time.perf_counter()
    relaxed = solve_program(build_program(scenario, settings=settings))
    selection = normalize_selection(round_y(scenario, relaxed.y))
    solution = assemble_solution(
        scenario,
        selection,
        solver="relax",
        started=started,
        iterations=relaxed.iterations,
        extra={"relaxation_objective_J": relaxed.objective},
    )
    LOGGER.info(
        "relax: relaxation %.6e J, rounded E_total=%.6e J after %d Newton steps",
        relaxed.objective,
        solution.energy.total,
        relaxed.iterations,
    )
    return solution
