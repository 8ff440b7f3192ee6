"""Solver output: a selection with its optimal allocation, energy and diagnostics."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from viewcast.allocator import optimal_allocation
from viewcast.model import (
    Allocation,
    EnergyBreakdown,
    Scenario,
    Selection,
    check_allocation,
    check_selection,
    energy,
    multicast_profile,
)

FLAG_FAILED = "failed"
FLAG_WIDENED = "unpruned_windows"
FLAG_NON_BINARY = "non_binary"


class InfeasibleSolutionError(RuntimeError):
    """Raised when an assembled solution violates a constraint."""


@dataclass(frozen=True)
class SolverDiagnostics:
    solver: str
    wall_ms: float
    candidates_evaluated: int = 0
    iterations: int = 0
    flags: tuple[str, ...] = ()
    extra: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "solver": self.solver,
            "wall_ms": round(self.wall_ms, 3),
            "candidates_evaluated": self.candidates_evaluated,
            "iterations": self.iterations,
            "flags": list(self.flags),
            **self.extra,
        }


@dataclass(frozen=True, eq=False)
class Solution:
    scenario: Scenario
    selection: Selection
    allocation: Allocation
    energy: EnergyBreakdown
    diagnostics: SolverDiagnostics

    @property
    def transmitted_views(self) -> tuple[int, ...]:
        grid = self.scenario.grid
        return tuple(grid.grid_at(int(col)) for col in self.selection.transmitted_columns())

    def utilized_views(self, k: int) -> tuple[int, ...]:
        grid = self.scenario.grid
        return tuple(grid.grid_at(int(col)) for col in np.flatnonzero(self.selection.y[k]))

    def to_dict(self) -> dict[str, Any]:
        grid = self.scenario.grid
        views = self.transmitted_views
        return {
            "transmitted": [grid.value(g) for g in views],
            "time_s": {
                f"{grid.value(g):g}": float(self.allocation.t[grid.column(g)]) for g in views
            },
            "power_w": {
                f"{grid.value(g):g}": float(self.allocation.p[grid.column(g)]) for g in views
            },
            "users": [
                {
                    "request": grid.value(r),
                    "utilizes": [grid.value(g) for g in self.utilized_views(k)],
                }
                for k, r in enumerate(self.scenario.requests)
            ],
            "multicast": [
                {
                    "view": grid.value(load.view),
                    "kind": load.kind,
                    "direct_users": list(load.direct_users),
                    "reference_users": list(load.reference_users),
                }
                for load in multicast_profile(self.scenario, self.selection)
            ],
            "energy": self.energy.to_dict(),
            "diagnostics": self.diagnostics.to_dict(),
        }


def selection_energy(scenario: Scenario, selection: Selection) -> EnergyBreakdown:
    """Energy of a selection under its optimal allocation."""
    allocation, _, _ = optimal_allocation(scenario, selection)
    return energy(scenario, selection, allocation)


def assemble_solution(
    scenario: Scenario,
    selection: Selection,
    *,
    solver: str,
    started: float,
    candidates_evaluated: int = 0,
    iterations: int = 0,
    flags: tuple[str, ...] = (),
    extra: dict[str, Any] | None = None,
) -> Solution:
    """Allocate a normalized selection, verify it and wrap it with diagnostics.

    ``started`` is a ``time.perf_counter()`` reading taken when the solver began.
    """
    allocation, _, duals = optimal_allocation(scenario, selection)
    report = check_selection(scenario, selection)
    if report.ok:
        report = check_allocation(scenario, selection, allocation)
    if not report.ok:
        raise InfeasibleSolutionError(f"{solver} produced an infeasible solution: {report}")
    payload = {"lambda_star": duals.lambda_star}
    payload.update(extra or {})
    diagnostics = SolverDiagnostics(
        solver=solver,
        wall_ms=(time.perf_counter() - started) * 1e3,
        candidates_evaluated=candidates_evaluated,
        iterations=iterations,
        flags=flags,
        extra=payload,
    )
    return Solution(
        scenario=scenario,
        selection=selection,
        allocation=allocation,
        energy=energy(scenario, selection, allocation),
        diagnostics=diagnostics,
    )
