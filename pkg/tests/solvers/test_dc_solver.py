from __future__ import annotations

import dataclasses
import logging

import numpy as np
import pytest

from viewcast.convex_core import build_program, solve_program
from viewcast.dc_solver import (
    _solve_subproblem,
    binary_gap,
    default_rho,
    linearized_penalty,
    penalized_objective,
    penalty,
    solve_dc,
)
from viewcast.exact_solver import solve_exact
from viewcast.experiments import GeneratorParams, generate_scenario
from viewcast.model import check_allocation, check_selection, direct_selection


def test_penalty_vanishes_on_binary_points():
    assert penalty(np.array([[0, 1, 1], [1, 0, 0]])) == 0.0


@pytest.mark.parametrize(
    "y, expected",
    [(np.full(8, 0.5), 2.0), (np.array([0.3]), 0.21), (np.zeros((2, 3)), 0.0)],
)
def test_penalty_values(y, expected):
    assert penalty(y) == pytest.approx(expected)


def test_tangent_is_exact_at_the_expansion_point():
    rng = np.random.default_rng(0)
    y = rng.uniform(0.0, 1.0, (3, 5))
    value, _, _ = linearized_penalty(y, y)
    assert value == pytest.approx(penalty(y))


def test_tangent_at_a_binary_point():
    prev = np.array([1.0, 0.0, 1.0, 0.0])
    _, coefficients, constant = linearized_penalty(np.full(4, 0.3), prev)
    assert coefficients.tolist() == [-1.0, 1.0, -1.0, 1.0]
    assert constant == 2.0


def test_tangent_majorizes_the_penalty():
    rng = np.random.default_rng(1)
    prev = np.full(6, 0.5)
    for _ in range(20):
        y = rng.uniform(0.0, 1.0, 6)
        value, coefficients, constant = linearized_penalty(y, prev)
        assert not coefficients.any()
        assert constant == pytest.approx(1.5)
        assert value == pytest.approx(constant)
        assert value >= penalty(y)
    other = rng.uniform(0.0, 1.0, 6)
    y = rng.uniform(0.0, 1.0, 6)
    assert linearized_penalty(y, other)[0] >= penalty(y) - 1e-12


def test_tangent_shapes_must_agree():
    with pytest.raises(ValueError):
        linearized_penalty(np.zeros(3), np.zeros(4))


def test_binary_gap_is_the_distance_to_the_nearest_binary_value():
    assert binary_gap(np.array([0.0, 1.0, 0.98, 0.1])) == pytest.approx(0.1)
    assert binary_gap(np.zeros((2, 2))) == 0.0


def test_penalized_objective_adds_the_weighted_penalty(four_users):
    selection = direct_selection(four_users)
    t = np.full(four_users.n_views, four_users.T / four_users.n_views)
    y = selection.y.astype(float) * 0.5
    base = penalized_objective(four_users, t, y, 0.0)
    assert penalized_objective(four_users, t, y, 2.0) == pytest.approx(base + 2.0 * penalty(y))


def test_default_rho_dominates_every_cost(four_users):
    rho = default_rho(four_users)
    assert rho > 10 * four_users.E_b
    assert rho > 10 * four_users.beta * float(four_users.E_u.max())


def test_rho_must_be_positive(four_users):
    with pytest.raises(ValueError):
        solve_dc(four_users, rho=0.0)


def test_forced_direct_instance_is_returned_unchanged(unit_scenario):
    scenario = unit_scenario([1, 3], V=3, channels=[1.0, 0.5])
    solution = solve_dc(scenario)
    assert solution.energy.total == pytest.approx(solve_exact(scenario).energy.total, rel=1e-12)
    assert solution.diagnostics.extra["rho_escalations"] == 0
    assert not solution.diagnostics.flags


def test_dc_is_feasible_and_dominated_by_exact(small_scenarios):
    for scenario in small_scenarios:
        solution = solve_dc(scenario)
        assert check_selection(scenario, solution.selection).ok
        assert check_allocation(scenario, solution.selection, solution.allocation).ok
        optimum = solve_exact(scenario).energy.total
        assert solution.energy.total >= optimum * (1 - 1e-9)


def test_penalized_objective_descends_within_each_rho(small_scenarios):
    for scenario in small_scenarios[:6]:
        solution = solve_dc(scenario)
        trace = solution.diagnostics.extra["penalized_objective_trace"]
        assert trace and solution.diagnostics.extra["rho"] == trace[-1][0]
        for (rho_a, value_a), (rho_b, value_b) in zip(trace, trace[1:]):
            if rho_a == rho_b:
                assert value_b <= value_a * (1 + 1e-6) + 1e-15


def test_iteration_cap_is_respected(four_users):
    solution = solve_dc(four_users, max_iter=1)
    escalations = solution.diagnostics.extra["rho_escalations"]
    assert solution.diagnostics.iterations <= 1 + escalations


def test_broken_warm_start_falls_back_to_a_cold_solve(unit_scenario):
    program = build_program(unit_scenario([1.5, 2.5], V=3, channels=[1.0, 0.4]))
    cold = solve_program(program)
    broken = dataclasses.replace(cold, raw=np.full_like(cold.raw, np.nan))
    retried = _solve_subproblem(program, broken)
    assert retried.objective == pytest.approx(cold.objective, rel=1e-6)


@pytest.mark.parametrize(
    "seeds", [range(5), pytest.param(range(5, 25), marks=pytest.mark.slow)], ids=["few", "many"]
)
def test_reference_point_instances_solve_without_fallback(seeds, caplog):
    caplog.set_level(logging.WARNING, logger="viewcast.dc_solver")
    for seed in seeds:
        scenario = generate_scenario(seed, GeneratorParams(K=4))
        solution = solve_dc(scenario)
        assert check_selection(scenario, solution.selection).ok
        assert check_allocation(scenario, solution.selection, solution.allocation).ok
    assert not [r for r in caplog.records if "relaxation failed" in r.getMessage()]
