"""Comparison schemes: server-side synthesis only, and user-side synthesis from neighbours."""

from __future__ import annotations

import time

import numpy as np

from viewcast.model import Scenario, direct_selection, normalize_selection
from viewcast.solution import Solution, assemble_solution


def baseline1(scenario: Scenario) -> Solution:
    """Transmit every requested view, synthesizing non-original ones at the server."""
    started = time.perf_counter()
    return assemble_solution(
        scenario, direct_selection(scenario), solver="baseline1", started=started
    )


def baseline2(scenario: Scenario) -> Solution:
    """Transmit the neighbouring original views of each request; users synthesize in between."""
    started = time.perf_counter()
    grid = scenario.grid
    y = np.zeros((scenario.K, scenario.n_views), dtype=np.int8)
    for k, r in enumerate(scenario.requests):
        if grid.is_original(r):
            y[k, grid.column(r)] = 1
            continue
        floor = (r // grid.Q) * grid.Q
        y[k, grid.column(floor)] = 1
        y[k, grid.column(floor + grid.Q)] = 1
    return assemble_solution(scenario, normalize_selection(y), solver="baseline2", started=started)
