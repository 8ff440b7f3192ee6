"""Exhaustive search over per-user choices with the closed-form allocation per candidate."""

from __future__ import annotations

import itertools
import threading
import time
from collections.abc import Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from viewcast.allocator import allocate_profile
from viewcast.candidate_sets import ChoiceFamily, UserChoice, choice_family
from viewcast.io import get_logger
from viewcast.model import Scenario, Selection, selection_from_rows
from viewcast.solution import FLAG_WIDENED, Solution, assemble_solution

LOGGER = get_logger(__name__)
BRUTE_FORCE_LIMIT = 10**7

ProfileKey = tuple[tuple[int, float], ...]


class InstanceTooLargeError(ValueError):
    """Raised when the unpruned search space exceeds the brute-force guard."""


class _EnergyCache:
    """Memoized transmission energy keyed by the (view, weakest channel) profile."""

    def __init__(self, scenario: Scenario) -> None:
        self._scenario = scenario
        self._store: dict[ProfileKey, float] = {}
        self._lock = threading.Lock()
        self.hits = 0

    def transmission(self, key: ProfileKey) -> float:
        cached = self._store.get(key)
        if cached is not None:
            with self._lock:
                self.hits += 1
            return cached
        times, powers, _ = allocate_profile(self._scenario, dict(key))
        value = sum(times[g] * powers[g] for g in times)
        with self._lock:
            self._store[key] = value
        return value


@dataclass(frozen=True, slots=True)
class _Best:
    energy: float
    key: bytes
    rows: tuple[tuple[int, ...], ...]
    evaluated: int


def _selection_key(scenario: Scenario, rows: Sequence[Sequence[int]]) -> bytes:
    y = np.zeros((scenario.K, scenario.n_views), dtype=np.int8)
    for k, row in enumerate(rows):
        for g in row:
            y[k, scenario.grid.column(g)] = 1
    return y.tobytes()


def _search(
    scenario: Scenario,
    combos: Iterable[tuple[UserChoice, ...]],
    cache: _EnergyCache,
) -> _Best | None:
    grid = scenario.grid
    weighted_user_cost = scenario.beta * scenario.E_u
    best: _Best | None = None
    evaluated = 0
    for combo in combos:
        evaluated += 1
        weakest: dict[int, float] = {}
        synthesis = 0.0
        for k, choice in enumerate(combo):
            h = float(scenario.channels[k])
            for g in choice.views():
                current = weakest.get(g)
                if current is None or h < current:
                    weakest[g] = h
            if not choice.is_direct:
                synthesis += float(weighted_user_cost[k])
        synthesis += scenario.E_b * sum(1 for g in weakest if not grid.is_original(g))
        total = cache.transmission(tuple(sorted(weakest.items()))) + synthesis
        if best is not None and total > best.energy:
            continue
        rows = tuple(choice.views() for choice in combo)
        key = _selection_key(scenario, rows)
        if best is None or (total, key) < (best.energy, best.key):
            best = _Best(total, key, rows, 0)
    if best is None:
        return None
    return _Best(best.energy, best.key, best.rows, evaluated)


def _reduce(results: Iterable[_Best | None]) -> _Best:
    found = [r for r in results if r is not None]
    evaluated = sum(r.evaluated for r in found)
    winner = min(found, key=lambda r: (r.energy, r.key))
    return _Best(winner.energy, winner.key, winner.rows, evaluated)


def search_family(
    scenario: Scenario, family: ChoiceFamily, *, workers: int = 1
) -> tuple[Selection, int]:
    """Minimum-energy selection over the cross product of ``family``; returns it and the count."""
    cache = _EnergyCache(scenario)
    head, *tail = family.choices
    if workers <= 1 or len(head) == 1:
        best = _search(scenario, itertools.product(head, *tail), cache)
        results = [best]
    else:
        # one chunk per choice of the first user; reduction order is fixed by the chunk list
        chunks = [itertools.product((choice,), *tail) for choice in head]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda combos: _search(scenario, combos, cache), chunks))
    best = _reduce(results)
    LOGGER.debug("searched %d candidates, %d allocation cache hits", best.evaluated, cache.hits)
    return selection_from_rows(scenario, best.rows), best.evaluated


def solve_exact(scenario: Scenario, *, workers: int = 1) -> Solution:
    """Globally optimal selection over the reduced family, ties broken by smallest ``y``."""
    started = time.perf_counter()
    family = choice_family(scenario, prune=True)
    selection, evaluated = search_family(scenario, family, workers=workers)
    solution = assemble_solution(
        scenario,
        selection,
        solver="exact",
        started=started,
        candidates_evaluated=evaluated,
        flags=(FLAG_WIDENED,) if family.widened else (),
    )
    LOGGER.info(
        "exact: %d candidates, E_total=%.6e J in %.1f ms",
        evaluated,
        solution.energy.total,
        solution.diagnostics.wall_ms,
    )
    return solution


def solve_brute(
    scenario: Scenario, *, workers: int = 1, limit: int = BRUTE_FORCE_LIMIT
) -> Solution:
    """Same search over every window pair of every user, without pruning."""
    started = time.perf_counter()
    family = choice_family(scenario, prune=False)
    if family.size > limit:
        raise InstanceTooLargeError(
            f"unpruned family has {family.size:,} candidates (limit {limit:,})"
        )
    selection, evaluated = search_family(scenario, family, workers=workers)
    solution = assemble_solution(
        scenario, selection, solver="brute", started=started, candidates_evaluated=evaluated
    )
    LOGGER.info("brute: %d candidates, E_total=%.6e J", evaluated, solution.energy.total)
    return solution
