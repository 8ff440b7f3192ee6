from __future__ import annotations

import logging

import pytest

from viewcast.candidate_sets import (
    UserChoice,
    candidate_table,
    choice_family,
    classify_pair,
    enumerate_user_choices,
    pruning_is_sound,
    pairwise_candidates,
    user_candidates,
)


def _values(scenario, views) -> list[float]:
    return sorted(scenario.grid.value(g) for g in views)


def test_same_request_is_case_1(unit_scenario):
    scenario = unit_scenario([2.5, 2.5], V=4)
    assert classify_pair(scenario.grid, *scenario.requests) == 1
    assert _values(scenario, pairwise_candidates(scenario, 0, 1)) == [2.5]


def test_overlapping_windows_are_case_2(unit_scenario):
    scenario = unit_scenario([1, 2.5], V=4)
    assert classify_pair(scenario.grid, *scenario.requests) == 2
    assert _values(scenario, pairwise_candidates(scenario, 0, 1)) == [1, 1.5, 2]


def test_request_inside_partner_window_is_case_3(unit_scenario):
    scenario = unit_scenario([1, 1.5], V=4)
    assert classify_pair(scenario.grid, *scenario.requests) == 3
    assert _values(scenario, pairwise_candidates(scenario, 0, 1)) == [1, 1.5, 2]


def test_far_apart_requests_are_case_1(unit_scenario):
    scenario = unit_scenario([1, 4], V=4)
    assert classify_pair(scenario.grid, *scenario.requests) == 1
    assert _values(scenario, pairwise_candidates(scenario, 0, 1)) == [1]


def test_pairwise_candidates_need_two_users(unit_scenario):
    scenario = unit_scenario([1, 2])
    with pytest.raises(ValueError):
        pairwise_candidates(scenario, 1, 1)


def test_two_users_candidates_equal_the_pair_set(unit_scenario):
    scenario = unit_scenario([2, 2.5], V=4)
    assert user_candidates(scenario, 0) == pairwise_candidates(scenario, 0, 1)


def test_candidates_union_over_partners(unit_scenario):
    scenario = unit_scenario([1, 2.5, 1.5], V=4)
    assert _values(scenario, user_candidates(scenario, 0)) == [1, 1.5, 2]


def test_shared_request_leaves_only_the_request(unit_scenario):
    scenario = unit_scenario([3, 3, 3], V=4)
    for k in range(3):
        assert _values(scenario, user_candidates(scenario, k)) == [3]
        assert enumerate_user_choices(scenario, k) == [UserChoice.direct(scenario.requests[k])]


def test_lone_user_keeps_full_windows(unit_scenario):
    scenario = unit_scenario([1.5])
    assert _values(scenario, user_candidates(scenario, 0)) == [1, 1.5, 2]


def test_interior_request_gets_direct_then_pair(unit_scenario):
    scenario = unit_scenario([1.5, 1], V=4)
    grid = scenario.grid
    choices = enumerate_user_choices(scenario, 0)
    assert choices == [
        UserChoice.direct(grid.index(1.5)),
        UserChoice.synth_pair(grid.index(1.5), grid.index(1), grid.index(2)),
    ]
    assert [c.describe(grid) for c in choices] == ["direct 1.5", "synth(1, 2)"]


def test_boundary_request_is_direct_only(unit_scenario):
    scenario = unit_scenario([1, 1.5], V=4)
    assert enumerate_user_choices(scenario, 0) == [UserChoice.direct(scenario.requests[0])]
    assert enumerate_user_choices(scenario, 0, prune=False) == [
        UserChoice.direct(scenario.requests[0])
    ]


def test_unpruned_choices_cover_every_window_pair(unit_scenario):
    scenario = unit_scenario([3], V=5, Q=2)
    choices = enumerate_user_choices(scenario, 0, prune=False)
    assert len(choices) == 1 + 2 * 2
    assert choices[0].is_direct
    assert all(c.left < c.request < c.right for c in choices[1:])


def test_family_widens_when_user_synthesis_is_cheap(unit_scenario, caplog):
    scenario = unit_scenario([1.5, 2.5], V=3, E_b=1.0, E_u=0.1)
    assert not pruning_is_sound(scenario)
    with caplog.at_level(logging.WARNING):
        family = choice_family(scenario)
    assert family.widened and not family.pruned
    assert "unpruned" in caplog.text
    assert family.size == 3 * 3


def test_family_size_is_the_product_of_choice_counts(unit_scenario):
    scenario = unit_scenario([1.5, 2, 2.5], V=3)
    family = choice_family(scenario)
    assert family.pruned and not family.widened
    assert family.size == len(family.choices[0]) * len(family.choices[1]) * len(family.choices[2])


def test_synthesis_pair_needs_both_references():
    with pytest.raises(ValueError):
        UserChoice(4, left=3)


def test_candidate_table_lists_every_user(unit_scenario):
    scenario = unit_scenario([1, 2.5, 1.5], V=4)
    rows = candidate_table(scenario)
    assert [row["user"] for row in rows] == [0, 1, 2]
    assert rows[0]["request"] == 1.0
    assert rows[0]["candidates"] == [1.0, 1.5, 2.0]
    assert rows[0]["choices"] == 1
