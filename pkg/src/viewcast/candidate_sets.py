"""Reduced search family for the exact solver.

For a pair of users ``(a, b)`` only a handful of views can appear in an optimal choice of
``a``; the union over partners gives the per-user candidate set. Choices are enumerated
as either direct service of the request or one left plus one right reference view.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Literal

import numpy as np

from viewcast.io import get_logger
from viewcast.model import Scenario, ViewGrid, reference_windows

LOGGER = get_logger(__name__)

PairCase = Literal[1, 2, 3]


@dataclass(frozen=True, slots=True)
class UserChoice:
    """How one user obtains its request: directly, or by synthesis from a reference pair."""

    request: int
    left: int | None = None
    right: int | None = None

    def __post_init__(self) -> None:
        if (self.left is None) != (self.right is None):
            raise ValueError("a synthesis pair needs both a left and a right view")

    @classmethod
    def direct(cls, request: int) -> UserChoice:
        return cls(request)

    @classmethod
    def synth_pair(cls, request: int, left: int, right: int) -> UserChoice:
        return cls(request, left, right)

    @property
    def is_direct(self) -> bool:
        return self.left is None

    def views(self) -> tuple[int, ...]:
        """Grid indices the user utilizes."""
        if self.left is None or self.right is None:
            return (self.request,)
        return (self.left, self.right)

    def describe(self, grid: ViewGrid) -> str:
        if self.left is None or self.right is None:
            return f"direct {grid.value(self.request):g}"
        return f"synth({grid.value(self.left):g}, {grid.value(self.right):g})"


def classify_pair(grid: ViewGrid, r_a: int, r_b: int) -> PairCase:
    """Which of the three window configurations a pair of requests falls into."""
    r_min, r_max = min(r_a, r_b), max(r_a, r_b)
    if r_min == r_max:
        return 1
    right_of_min = reference_windows(grid, r_min)[1]
    if r_max in right_of_min:
        return 3
    left_of_max = reference_windows(grid, r_max)[0]
    if set(right_of_min).isdisjoint(left_of_max):
        return 1
    return 2


def pairwise_candidates(scenario: Scenario, a: int, b: int) -> frozenset[int]:
    """Views user ``a`` may utilize when only users ``a`` and ``b`` are considered."""
    if a == b:
        raise ValueError("pairwise candidates need two distinct users")
    grid = scenario.grid
    r_a, r_b = scenario.requests[a], scenario.requests[b]
    r_min, r_max = min(r_a, r_b), max(r_a, r_b)
    case = classify_pair(grid, r_a, r_b)
    if case == 1:
        return frozenset({r_a})

    reach = grid.delta_steps
    if case == 2:
        overlap = set(reference_windows(grid, r_min)[1]) & set(reference_windows(grid, r_max)[0])
        members = {r_a, r_max - reach, r_min + reach}
        members |= {g for g in overlap if grid.is_original(g)}
    else:
        members = {r_a, r_b, r_max - reach, r_min + reach}
    return frozenset(g for g in members if grid.contains(g))


def user_candidates(scenario: Scenario, k: int) -> frozenset[int]:
    """Union of the pairwise sets of user ``k``; a lone user keeps its full windows."""
    if scenario.K == 1:
        left, right = reference_windows(scenario.grid, scenario.requests[k])
        return frozenset({scenario.requests[k], *left, *right})
    members: set[int] = set()
    for other in range(scenario.K):
        if other != k:
            members |= pairwise_candidates(scenario, k, other)
    return frozenset(members)


def pruning_is_sound(scenario: Scenario) -> bool:
    """True when every user's weighted synthesis cost is at least the server's."""
    return bool(np.all(scenario.beta * scenario.E_u >= scenario.E_b))


def enumerate_user_choices(
    scenario: Scenario,
    k: int,
    *,
    prune: bool = True,
    candidates: frozenset[int] | None = None,
) -> list[UserChoice]:
    """Direct service first, then every admissible (left, right) pair in grid order."""
    r = scenario.requests[k]
    left, right = reference_windows(scenario.grid, r)
    if prune:
        allowed = candidates if candidates is not None else user_candidates(scenario, k)
        left = tuple(g for g in left if g in allowed)
        right = tuple(g for g in right if g in allowed)
    choices = [UserChoice.direct(r)]
    choices.extend(UserChoice.synth_pair(r, lo, hi) for lo in left for hi in right)
    return choices


@dataclass(frozen=True)
class ChoiceFamily:
    """Per-user choice lists whose cross product is the search space."""

    choices: tuple[tuple[UserChoice, ...], ...]
    pruned: bool
    widened: bool

    @property
    def size(self) -> int:
        return int(np.prod([len(c) for c in self.choices], dtype=float))


def choice_family(scenario: Scenario, *, prune: bool = True) -> ChoiceFamily:
    """Build the per-user lists, widening to full windows when pruning would be unsound."""
    widened = False
    if prune and not pruning_is_sound(scenario):
        LOGGER.warning(
            "user synthesis cost below server cost for some user (beta*E_u < E_b); "
            "searching unpruned windows"
        )
        prune = False
        widened = True
    lists = tuple(
        tuple(enumerate_user_choices(scenario, k, prune=prune)) for k in range(scenario.K)
    )
    return ChoiceFamily(choices=lists, pruned=prune, widened=widened)


def candidate_table(scenario: Scenario) -> list[dict[str, Any]]:
    """One row per user with its request, candidate views and choice count."""
    grid = scenario.grid
    rows: list[dict[str, Any]] = []
    for k in range(scenario.K):
        members = sorted(user_candidates(scenario, k))
        rows.append(
            {
                "user": k,
                "request": grid.value(scenario.requests[k]),
                "candidates": [grid.value(g) for g in members],
                "choices": len(enumerate_user_choices(scenario, k)),
            }
        )
    return rows
