"""Self-check suite run by ``viewcast validate``: oracles and cross-solver invariants."""

from __future__ import annotations

import math
import time
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np

from viewcast.allocator import DualState, optimal_allocation
from viewcast.baselines import baseline1, baseline2
from viewcast.convex_core import perspective_objective
from viewcast.dc_solver import solve_dc
from viewcast.exact_solver import solve_brute, solve_exact
from viewcast.experiments import GeneratorParams, generate_scenario
from viewcast.io import get_logger
from viewcast.model import (
    Allocation,
    Scenario,
    Selection,
    ViewGrid,
    check_allocation,
    check_selection,
    selection_from_rows,
)
from viewcast.numerics import lambert_w0
from viewcast.relax_round import solve_relax_round

LOGGER = get_logger(__name__)

SMALL_PARAMS = GeneratorParams(K=3, V=3, Q=2, delta=1.0)


@dataclass(frozen=True, slots=True)
class CheckResult:
    name: str
    ok: bool
    detail: str
    elapsed_ms: float = 0.0


@dataclass
class ValidationReport:
    results: list[CheckResult] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.results)

    def failures(self) -> list[CheckResult]:
        return [r for r in self.results if not r.ok]


def four_user_scenario(channels: Sequence[float] = (1e-3, 1e-3, 1e-3, 1e-3)) -> Scenario:
    """Four users requesting the original views 1..4 of a half-step grid.

    The 1 MHz band makes each extra view in the frame costly, so sharing a synthesized
    reference between the two middle users beats serving everyone directly.
    """
    return Scenario.build(
        ViewGrid.from_delta(4, 2, 1),
        requests=(1, 2, 3, 4),
        channels=channels,
        R=10e6,
        T=0.1,
        B=1e6,
        E_b=5e-7,
        E_u=5e-7,
        beta=3.0,
    )


def four_user_selection(scenario: Scenario) -> Selection:
    """Views 1, 2.5 and 4 serve all four users, two of them by synthesis."""
    grid = scenario.grid
    rows = [
        (grid.index(1),),
        (grid.index(1), grid.index(2.5)),
        (grid.index(2.5), grid.index(4)),
        (grid.index(4),),
    ]
    return selection_from_rows(scenario, rows)


def view_energy(scenario: Scenario, h: float, t: float) -> float:
    """Transmission energy of one view over time ``t`` at weakest channel ``h``."""
    exponent = math.log(2.0) * scenario.R * scenario.T / (scenario.B * t)
    return t * scenario.n0 / h * math.expm1(exponent)


def grid_search_energy(scenario: Scenario, h_mins: Sequence[float], step: float = 1e-3) -> float:
    """Minimum transmission energy over a grid on the time simplex (two or three views)."""
    T = scenario.T
    ticks = np.arange(1, round(1.0 / step)) * step * T
    ln2_rt_b = math.log(2.0) * scenario.R * T / scenario.B

    def energy(h: float, t: np.ndarray) -> np.ndarray:
        return t * scenario.n0 / h * np.expm1(ln2_rt_b / t)

    if len(h_mins) == 2:
        return float(np.min(energy(h_mins[0], ticks) + energy(h_mins[1], T - ticks)))
    if len(h_mins) == 3:
        t1, t2 = np.meshgrid(ticks, ticks, indexing="ij")
        t3 = T - t1 - t2
        valid = t3 > 0.5 * step * T
        total = np.full(t1.shape, np.inf)
        total[valid] = (
            energy(h_mins[0], t1[valid])
            + energy(h_mins[1], t2[valid])
            + energy(h_mins[2], t3[valid])
        )
        return float(total.min())
    raise ValueError("grid search supports two or three views")


def stationarity_residuals(
    scenario: Scenario, allocation: Allocation, duals: DualState
) -> list[float]:
    """Relative gap between -dE_v/dt_v (central differences) and the multiplier, per view."""
    residuals = []
    for g, h in duals.h_min.items():
        t = float(allocation.t[scenario.grid.column(g)])
        step = 1e-6 * t
        slope = (view_energy(scenario, h, t + step) - view_energy(scenario, h, t - step)) / (
            2 * step
        )
        residuals.append(abs(slope + duals.lambda_star) / duals.lambda_star)
    return residuals


def _timed(name: str, check: Callable[[], tuple[bool, str]]) -> CheckResult:
    started = time.perf_counter()
    try:
        ok, detail = check()
    except Exception as err:  # noqa: BLE001 - reported as a failed check
        ok, detail = False, f"{type(err).__name__}: {err}"
    result = CheckResult(name, ok, detail, (time.perf_counter() - started) * 1e3)
    log = LOGGER.info if ok else LOGGER.error
    log("%s: %s (%s)", name, "ok" if ok else "FAILED", detail)
    return result


def _check_lambert() -> tuple[bool, str]:
    xs = np.linspace(-1.0, 10.0, 1000)
    worst = max(abs(lambert_w0(x * math.exp(x)) - x) for x in xs)
    return worst <= 1e-10, f"max round-trip error {worst:.2e}"


def _check_allocator(seed: int, count: int) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    worst_gap = 0.0
    worst_kkt = 0.0
    for i in range(count):
        scenario = generate_scenario(seed + i, GeneratorParams(K=3))
        grid = scenario.grid
        n_views = int(rng.integers(2, 4))
        views = rng.choice(np.arange(grid.first, grid.last + 1), size=n_views, replace=False)
        rows = [(int(views[k % n_views]),) for k in range(scenario.K)]
        selection = selection_from_rows(scenario, rows)
        allocation, e_t, duals = optimal_allocation(scenario, selection)
        oracle = grid_search_energy(scenario, [duals.h_min[g] for g in sorted(duals.h_min)])
        worst_gap = max(worst_gap, abs(e_t - oracle) / oracle)
        worst_kkt = max(worst_kkt, *stationarity_residuals(scenario, allocation, duals))
        if abs(allocation.t.sum() - scenario.T) > 1e-9 * scenario.T:
            return False, f"instance {i}: time budget not tight"
    ok = worst_gap <= 1e-3 and worst_kkt <= 1e-6
    return ok, f"grid-search gap {worst_gap:.2e}, stationarity {worst_kkt:.2e}"


def _small_instances(seed: int, count: int) -> list[Scenario]:
    return [
        generate_scenario(seed + i, GeneratorParams(K=1 + i % 3, V=3, Q=2, delta=1.0))
        for i in range(count)
    ]


def _check_pruning(seed: int, count: int) -> tuple[bool, str]:
    worst = 0.0
    for scenario in _small_instances(seed, count):
        exact = solve_exact(scenario).energy.total
        brute = solve_brute(scenario).energy.total
        worst = max(worst, abs(exact - brute) / brute)
    return worst <= 1e-9, f"max relative gap exact vs brute {worst:.2e}"


def _check_equivalence(seed: int, count: int) -> tuple[bool, str]:
    worst = 0.0
    for scenario in _small_instances(seed, count):
        solution = solve_exact(scenario)
        direct = perspective_objective(
            solution.allocation.t, solution.selection.y.astype(float), scenario
        )
        worst = max(worst, abs(direct - solution.energy.total) / solution.energy.total)
    return worst <= 1e-8, f"max relative mismatch {worst:.2e}"


def _check_dominance(seed: int, count: int) -> tuple[bool, str]:
    heuristics = {
        "relax": solve_relax_round,
        "dc": solve_dc,
        "baseline1": baseline1,
        "baseline2": baseline2,
    }
    for scenario in _small_instances(seed, count):
        optimum = solve_exact(scenario).energy.total
        for name, solver in heuristics.items():
            solution = solver(scenario)
            if not check_selection(scenario, solution.selection).ok:
                return False, f"{name} returned an infeasible selection"
            if not check_allocation(scenario, solution.selection, solution.allocation).ok:
                return False, f"{name} returned an infeasible allocation"
            if solution.energy.total < optimum * (1.0 - 1e-9):
                return False, f"{name} beat the exact optimum"
    return True, f"{len(heuristics)} schemes feasible and >= exact on {count} instances"


def _check_four_user_example() -> tuple[bool, str]:
    scenario = four_user_scenario()
    report = check_selection(scenario, four_user_selection(scenario))
    if not report.ok:
        return False, str(report)
    views = solve_exact(scenario).transmitted_views
    return len(views) <= 3, f"exact transmits {len(views)} views"


def run_validation(seed: int = 0, instances: int = 20) -> ValidationReport:
    """Run every check; failures are collected rather than raised."""
    report = ValidationReport()
    report.results.append(_timed("lambert_w0 round trip", _check_lambert))
    report.results.append(
        _timed("allocator vs grid search", lambda: _check_allocator(seed, instances))
    )
    report.results.append(_timed("pruned vs brute force", lambda: _check_pruning(seed, instances)))
    report.results.append(
        _timed("relaxed objective at binary optimum", lambda: _check_equivalence(seed, instances))
    )
    report.results.append(
        _timed("heuristics feasible and dominated", lambda: _check_dominance(seed, instances))
    )
    report.results.append(_timed("four-user worked example", _check_four_user_example))
    return report
