"""Penalty method with convex-concave iterations.

The binary constraint on ``y`` is replaced by the concave penalty ``rho * sum y (1 - y)``.
Each iteration replaces the penalty by its tangent at the previous iterate, which
majorizes it, and solves the resulting convex program with the barrier solver.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt

from viewcast.allocator import optimal_allocation, transmission_energy
from viewcast.convex_core import (
    BarrierSettings,
    ConvexSolution,
    ConvexViewProgram,
    build_program,
    perspective_objective,
    solve_program,
)
from viewcast.io import get_logger
from viewcast.model import Scenario, check_selection, direct_selection, normalize_selection
from viewcast.numerics import ConvergenceError
from viewcast.relax_round import round_y
from viewcast.solution import FLAG_NON_BINARY, Solution, assemble_solution

LOGGER = get_logger(__name__)

BINARY_EPS = 1e-3
MAX_ESCALATIONS = 3
DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 50


class DcSubproblemError(RuntimeError):
    """Raised when a convex subproblem fails; carries the iterate index."""

    def __init__(self, message: str, *, iteration: int) -> None:
        super().__init__(message)
        self.iteration = iteration


@dataclass
class DcState:
    iteration: int
    t: npt.NDArray[np.float64]
    y: npt.NDArray[np.float64]
    rho: float
    history: list[tuple[float, float]] = field(default_factory=list)
    convex: ConvexSolution | None = None


def penalty(y: npt.ArrayLike) -> float:
    """Sum of y (1 - y); zero exactly when every entry is binary."""
    arr = np.asarray(y, dtype=float)
    return float(np.sum(arr * (1.0 - arr)))


def linearized_penalty(
    y: npt.ArrayLike, y_prev: npt.ArrayLike
) -> tuple[float, npt.NDArray[np.float64], float]:
    """Tangent of the penalty at ``y_prev`` evaluated at ``y``: (value, coefficients, constant)."""
    arr = np.asarray(y, dtype=float)
    prev = np.asarray(y_prev, dtype=float)
    if arr.shape != prev.shape:
        raise ValueError(f"shape mismatch: y{arr.shape} vs y_prev{prev.shape}")
    coefficients = 1.0 - 2.0 * prev
    constant = float(np.sum(prev**2))
    return float(np.sum(coefficients * arr)) + constant, coefficients, constant


def penalized_objective(
    scenario: Scenario, t: npt.ArrayLike, y: npt.ArrayLike, rho: float
) -> float:
    return perspective_objective(t, y, scenario) + rho * penalty(y)


def default_rho(scenario: Scenario) -> float:
    """Ten times the server cost, the largest weighted user cost and the all-direct energy."""
    direct = transmission_energy(scenario, direct_selection(scenario))
    return 10.0 * (scenario.E_b + scenario.beta * float(scenario.E_u.max()) + direct)


def binary_gap(y: npt.ArrayLike) -> float:
    arr = np.asarray(y, dtype=float)
    return float(np.max(np.minimum(arr, 1.0 - arr), initial=0.0))


def _iterate(
    scenario: Scenario,
    state: DcState,
    *,
    tol: float,
    max_iter: int,
    settings: BarrierSettings | None,
) -> DcState:
    for _ in range(max_iter):
        index = state.iteration + 1
        _, coefficients, constant = linearized_penalty(state.y, state.y)
        program = build_program(
            scenario, state.rho * coefficients, state.rho * constant, settings=settings
        )
        try:
            convex = _solve_subproblem(program, state.convex)
        except ConvergenceError as err:
            raise DcSubproblemError(
                f"convex subproblem failed at iteration {index}: {err}", iteration=index
            ) from err
        value = penalized_objective(scenario, convex.t, convex.y, state.rho)
        previous = state.history[-1][1]
        state.history.append((state.rho, value))
        state.iteration = index
        state.t, state.y, state.convex = convex.t, convex.y, convex
        LOGGER.debug(
            "dc iteration %d: penalized objective %.9e (rho=%.3e)", index, value, state.rho
        )
        if abs(previous - value) < tol * (1.0 + abs(value)):
            break
    return state


def _solve_subproblem(
    program: ConvexViewProgram, start: ConvexSolution | None
) -> ConvexSolution:
    if start is not None:
        try:
            return solve_program(program, start=start)
        except ConvergenceError as err:
            LOGGER.debug("warm-started subproblem failed (%s); solving cold", err)
    return solve_program(program)


def _snap(scenario: Scenario, y: npt.NDArray[np.float64]) -> tuple[npt.NDArray[np.int8], bool]:
    if binary_gap(y) <= BINARY_EPS:
        snapped = np.rint(y).astype(np.int8)
        if check_selection(scenario, normalize_selection(snapped)).ok:
            return snapped, True
    return round_y(scenario, y), False


def solve_dc(
    scenario: Scenario,
    rho: float | None = None,
    *,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
    settings: BarrierSettings | None = None,
) -> Solution:
    """Iterate convex approximations of the penalized problem, then extract a binary selection."""
    started = time.perf_counter()
    rho = default_rho(scenario) if rho is None else float(rho)
    if rho <= 0:
        raise ValueError(f"rho must be > 0, got {rho}")

    try:
        relaxed: ConvexSolution | None = solve_program(build_program(scenario, settings=settings))
        t0, y0 = relaxed.t, relaxed.y
    except ConvergenceError as err:
        LOGGER.warning("relaxation failed (%s); starting from direct service", err)
        relaxed = None
        direct = direct_selection(scenario)
        t0 = optimal_allocation(scenario, direct)[0].t
        y0 = direct.y.astype(float)

    state = DcState(iteration=0, t=t0, y=y0, rho=rho, convex=relaxed)
    state.history.append((rho, penalized_objective(scenario, t0, y0, rho)))

    escalations = 0
    state = _iterate(scenario, state, tol=tol, max_iter=max_iter, settings=settings)
    while binary_gap(state.y) > BINARY_EPS and escalations < MAX_ESCALATIONS:
        escalations += 1
        state.rho *= 2.0
        restart = penalized_objective(scenario, state.t, state.y, state.rho)
        state.history.append((state.rho, restart))
        LOGGER.warning(
            "dc iterate not binary (gap %.2e); raising rho to %.3e",
            binary_gap(state.y),
            state.rho,
        )
        state = _iterate(scenario, state, tol=tol, max_iter=max_iter, settings=settings)

    y_binary, clean = _snap(scenario, state.y)
    flags: tuple[str, ...] = ()
    if not clean:
        LOGGER.warning("dc finished non-binary (gap %.2e); rounding", binary_gap(state.y))
        flags = (FLAG_NON_BINARY,)
    solution = assemble_solution(
        scenario,
        normalize_selection(y_binary),
        solver="dc",
        started=started,
        iterations=state.iteration,
        flags=flags,
        extra={
            "rho": state.rho,
            "rho_escalations": escalations,
            "penalized_objective_trace": [[r, v] for r, v in state.history],
        },
    )
    LOGGER.info(
        "dc: %d iterations, E_total=%.6e J, rho=%.3e",
        state.iteration,
        solution.energy.total,
        state.rho,
    )
    return solution
