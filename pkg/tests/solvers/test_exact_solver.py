from __future__ import annotations

import numpy as np
import pytest

from viewcast.allocator import transmission_energy
from viewcast.candidate_sets import choice_family
from viewcast.exact_solver import InstanceTooLargeError, solve_brute, solve_exact
from viewcast.experiments import GeneratorParams, generate_scenario
from viewcast.model import direct_selection, selection_from_rows
from viewcast.solution import FLAG_WIDENED, selection_energy


def test_lone_synthesized_request_prefers_server_synthesis(unit_scenario):
    scenario = unit_scenario([1.5])
    solution = solve_exact(scenario)
    grid = scenario.grid
    assert [grid.value(g) for g in solution.transmitted_views] == [1.5]
    assert solution.energy.transmission == pytest.approx(1.0)
    assert solution.energy.server_synthesis == pytest.approx(0.5)
    assert solution.energy.total == pytest.approx(1.5)
    assert solution.diagnostics.candidates_evaluated == 2

    pair = selection_from_rows(scenario, [(grid.index(1), grid.index(2))])
    assert selection_energy(scenario, pair).total == pytest.approx(4.5)


def test_shared_original_request_transmits_one_view(unit_scenario):
    scenario = unit_scenario([2, 2, 2], V=3, channels=[0.5, 1.0, 2.0])
    solution = solve_exact(scenario)
    assert solution.transmitted_views == (scenario.grid.index(2),)
    assert solution.energy.server_synthesis == 0.0
    assert solution.energy.user_synthesis == 0.0
    assert solution.energy.transmission == pytest.approx(2.0 * (2.0 - 1.0))


def test_free_synthesis_reduces_to_transmission_energy(unit_scenario):
    scenario = unit_scenario([1.5, 2.5], V=3, E_b=0.0, E_u=0.0, channels=[1.0, 0.3])
    solution = solve_exact(scenario)
    assert solution.energy.total == pytest.approx(solution.energy.transmission)
    assert solution.energy.total <= transmission_energy(scenario, direct_selection(scenario))
    assert solution.energy.total == pytest.approx(solve_brute(scenario).energy.total, rel=1e-9)


def test_pruned_search_matches_brute_force(small_scenarios):
    for scenario in small_scenarios:
        exact = solve_exact(scenario)
        brute = solve_brute(scenario)
        assert exact.energy.total == pytest.approx(brute.energy.total, rel=1e-9)
        assert exact.diagnostics.candidates_evaluated <= brute.diagnostics.candidates_evaluated


def test_pruning_never_loses_the_optimum_on_many_small_instances():
    for seed in range(100, 200):
        scenario = generate_scenario(seed, GeneratorParams(K=1 + seed % 3, V=3, Q=2, delta=1.0))
        exact = solve_exact(scenario)
        brute = solve_brute(scenario)
        assert exact.energy.total == pytest.approx(brute.energy.total, rel=1e-9), seed


def test_lone_original_request_is_served_directly(unit_scenario):
    scenario = unit_scenario([2], V=3, channels=[0.25])
    solution = solve_brute(scenario)
    assert solution.transmitted_views == (scenario.grid.index(2),)
    assert solution.energy.total == pytest.approx(4.0 * (2.0 - 1.0))


def test_brute_force_guard_trips_on_reference_size_instances():
    scenario = generate_scenario(0, GeneratorParams())
    with pytest.raises(InstanceTooLargeError):
        solve_brute(scenario)


def test_parallel_search_returns_the_same_selection(small_scenarios):
    for scenario in small_scenarios[:6]:
        serial = solve_exact(scenario)
        parallel = solve_exact(scenario, workers=3)
        np.testing.assert_array_equal(serial.selection.y, parallel.selection.y)
        assert serial.energy.total == parallel.energy.total
        assert (
            serial.diagnostics.candidates_evaluated
            == parallel.diagnostics.candidates_evaluated
        )


def test_every_candidate_is_evaluated(small_scenarios):
    scenario = small_scenarios[2]
    solution = solve_exact(scenario)
    assert solution.diagnostics.candidates_evaluated == choice_family(scenario).size


def test_cheap_user_synthesis_searches_full_windows(unit_scenario):
    scenario = unit_scenario([1.5, 2.5], V=3, E_b=1.0, E_u=0.01)
    solution = solve_exact(scenario)
    assert FLAG_WIDENED in solution.diagnostics.flags
    assert solution.energy.total == pytest.approx(solve_brute(scenario).energy.total, rel=1e-9)


def test_solution_serializes_views_as_values(four_users):
    payload = solve_exact(four_users).to_dict()
    assert set(payload) == {
        "transmitted",
        "time_s",
        "power_w",
        "users",
        "multicast",
        "energy",
        "diagnostics",
    }
    assert payload["diagnostics"]["solver"] == "exact"
    assert payload["energy"]["E_total_J"] > 0
    assert sum(payload["time_s"].values()) == pytest.approx(four_users.T, rel=1e-9)
    assert [user["request"] for user in payload["users"]] == [1.0, 2.0, 3.0, 4.0]
