from __future__ import annotations

import pytest

from viewcast.model import InvalidViewError, ViewGrid, reference_windows


def _values(grid: ViewGrid, indices) -> list[float]:
    return [grid.value(g) for g in indices]


def test_boundary_view_has_empty_left_window():
    grid = ViewGrid.from_delta(4, 2, 1)
    left, right = reference_windows(grid, grid.index(1))
    assert left == ()
    assert _values(grid, right) == [1.5, 2.0]


def test_interior_windows_span_delta_times_q_views():
    grid = ViewGrid.from_delta(5, 10, 1)
    left, right = reference_windows(grid, grid.index(3))
    assert len(left) == 10 and len(right) == 10
    assert _values(grid, left) == pytest.approx([2.0 + i / 10 for i in range(10)])
    assert _values(grid, right) == pytest.approx([3.1 + i / 10 for i in range(10)])


def test_right_window_is_clipped_at_the_last_view():
    grid = ViewGrid.from_delta(4, 2, 1)
    left, right = reference_windows(grid, grid.index(3.5))
    assert _values(grid, left) == [2.5, 3.0]
    assert _values(grid, right) == [4.0]


def test_wider_reach_widens_windows():
    grid = ViewGrid.from_delta(5, 2, 1.5)
    left, right = reference_windows(grid, grid.index(3))
    assert _values(grid, left) == [1.5, 2.0, 2.5]
    assert _values(grid, right) == [3.5, 4.0, 4.5]


def test_index_round_trips_every_grid_view():
    grid = ViewGrid.from_delta(5, 10, 1)
    for g in grid.views():
        assert grid.index(grid.value(g)) == g
    assert grid.size == 41
    assert grid.column(grid.first) == 0 and grid.grid_at(grid.size - 1) == grid.last


@pytest.mark.parametrize("view", [2.55, 0.5, 5.1, "7/3"])
def test_off_grid_values_are_rejected(view):
    grid = ViewGrid.from_delta(5, 10, 1)
    with pytest.raises(InvalidViewError):
        grid.index(view)


def test_original_views_are_integers():
    grid = ViewGrid.from_delta(3, 2, 1)
    assert grid.original_mask().tolist() == [True, False, True, False, True]


@pytest.mark.parametrize(
    "V, Q, delta",
    [(1, 2, 1), (3, 1, 1), (3, 2, 0.5), (3, 10, 1.05)],
)
def test_invalid_grids_raise(V, Q, delta):
    with pytest.raises(ValueError):
        ViewGrid.from_delta(V, Q, delta)


def test_windows_reject_off_grid_index():
    grid = ViewGrid.from_delta(3, 2, 1)
    with pytest.raises(InvalidViewError):
        reference_windows(grid, grid.last + 1)
