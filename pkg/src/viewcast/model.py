"""Domain types, the view-index grid, feasibility predicates and the energy functional.

Views are stored as integer grid indices ``g = v * Q`` with ``g`` in ``[Q, V * Q]``.
Arrays indexed by view use the column ``g - Q``; nothing keys on floating-point views.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from enum import IntEnum
from fractions import Fraction
from typing import Literal

import numpy as np
import numpy.typing as npt

K_BOLTZMANN = 1.38e-23  # J/K
T0_KELVIN = 300.0
ALLOCATION_RTOL = 1e-9

FloatArray = npt.NDArray[np.float64]
IntArray = npt.NDArray[np.int8]


class InvalidViewError(ValueError):
    """Raised when a view or request does not lie on the 1/Q grid of the view set."""


class ShapeError(ValueError):
    """Raised when selection or allocation arrays do not match the scenario."""


@dataclass(frozen=True, slots=True)
class ViewGrid:
    """The full view set {1, 1 + 1/Q, ..., V} with synthesis reach ``delta_steps / Q``."""

    V: int
    Q: int
    delta_steps: int

    def __post_init__(self) -> None:
        if self.V < 2:
            raise ValueError(f"V must be >= 2, got {self.V}")
        if self.Q < 2:
            raise ValueError(f"Q must be >= 2, got {self.Q}")
        if self.delta_steps < self.Q:
            raise ValueError(f"delta must be >= 1, got {self.delta_steps}/{self.Q}")

    @classmethod
    def from_delta(cls, V: int, Q: int, delta: float | Fraction | str) -> ViewGrid:
        """Build a grid from a reach given in view units; it must be a multiple of 1/Q."""
        steps = Fraction(delta).limit_denominator(10**6) * Q
        if steps.denominator != 1:
            raise ValueError(f"delta={delta} is not a multiple of 1/Q (Q={Q})")
        return cls(V=int(V), Q=int(Q), delta_steps=int(steps))

    @property
    def delta(self) -> float:
        return self.delta_steps / self.Q

    @property
    def size(self) -> int:
        return (self.V - 1) * self.Q + 1

    @property
    def first(self) -> int:
        return self.Q

    @property
    def last(self) -> int:
        return self.V * self.Q

    def views(self) -> range:
        return range(self.first, self.last + 1)

    def contains(self, g: int) -> bool:
        return self.first <= g <= self.last

    def is_original(self, g: int) -> bool:
        return g % self.Q == 0

    def index(self, view: float | int | Fraction | str) -> int:
        """Convert a view value (e.g. 2.5) to its grid index, rejecting off-grid values."""
        scaled = Fraction(view).limit_denominator(10**6) * self.Q
        if scaled.denominator != 1 or not self.contains(int(scaled)):
            raise InvalidViewError(
                f"view {view} is not on the grid {{1, 1+1/{self.Q}, ..., {self.V}}}"
            )
        return int(scaled)

    def value(self, g: int) -> float:
        return g / self.Q

    def column(self, g: int) -> int:
        return g - self.Q

    def grid_at(self, column: int) -> int:
        return column + self.Q

    def original_mask(self) -> npt.NDArray[np.bool_]:
        return np.array([self.is_original(g) for g in self.views()], dtype=bool)


def reference_windows(grid: ViewGrid, view: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Return the (left, right) reference windows of grid index ``view``, clipped to the grid."""
    if not grid.contains(view):
        raise InvalidViewError(f"grid index {view} outside [{grid.first}, {grid.last}]")
    left = tuple(range(max(grid.first, view - grid.delta_steps), view))
    right = tuple(range(view + 1, min(grid.last, view + grid.delta_steps) + 1))
    return left, right


@dataclass(frozen=True, eq=False)
class Scenario:
    """A complete problem instance."""

    grid: ViewGrid
    requests: tuple[int, ...]
    channels: FloatArray
    R: float
    T: float
    B: float
    E_b: float
    E_u: FloatArray
    beta: float
    n0: float

    def __post_init__(self) -> None:
        channels = np.array(self.channels, dtype=float)
        E_u = np.array(self.E_u, dtype=float)
        requests = tuple(int(r) for r in self.requests)
        if not requests:
            raise ValueError("scenario needs at least one user")
        if channels.shape != (len(requests),):
            raise ShapeError(f"expected {len(requests)} channel gains, got {channels.shape}")
        if E_u.shape == ():
            E_u = np.full(len(requests), float(E_u))
        if E_u.shape != (len(requests),):
            raise ShapeError(f"expected {len(requests)} user synthesis energies, got {E_u.shape}")
        for r in requests:
            if not self.grid.contains(r):
                raise InvalidViewError(f"request grid index {r} is off the view grid")
        if np.any(channels <= 0) or not np.all(np.isfinite(channels)):
            raise ValueError("channel gains must be finite and > 0")
        for name in ("R", "T", "B", "n0"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.E_b < 0 or np.any(E_u < 0):
            raise ValueError("synthesis energies must be >= 0")
        if self.beta < 1:
            raise ValueError(f"beta must be >= 1, got {self.beta}")
        channels.setflags(write=False)
        E_u.setflags(write=False)
        object.__setattr__(self, "channels", channels)
        object.__setattr__(self, "E_u", E_u)
        object.__setattr__(self, "requests", requests)

    @classmethod
    def build(
        cls,
        grid: ViewGrid,
        *,
        requests: Sequence[float],
        channels: Sequence[float],
        R: float,
        T: float,
        B: float,
        E_b: float,
        E_u: float | Sequence[float],
        beta: float,
        n0: float | None = None,
    ) -> Scenario:
        """Build a scenario from view values; n0 defaults to the thermal noise B*k_B*T0."""
        return cls(
            grid=grid,
            requests=tuple(grid.index(r) for r in requests),
            channels=np.asarray(channels, dtype=float),
            R=float(R),
            T=float(T),
            B=float(B),
            E_b=float(E_b),
            E_u=np.asarray(E_u, dtype=float),
            beta=float(beta),
            n0=float(n0) if n0 is not None else thermal_noise(B),
        )

    @property
    def K(self) -> int:
        return len(self.requests)

    @property
    def n_views(self) -> int:
        return self.grid.size

    def request_values(self) -> tuple[float, ...]:
        return tuple(self.grid.value(r) for r in self.requests)

    def fingerprint(self) -> tuple:
        """Hashable value identity; two scenarios with equal fingerprints are the same instance."""
        return (
            self.grid,
            self.requests,
            tuple(self.channels.tolist()),
            self.R,
            self.T,
            self.B,
            self.E_b,
            tuple(self.E_u.tolist()),
            self.beta,
            self.n0,
        )


def thermal_noise(bandwidth_hz: float) -> float:
    return bandwidth_hz * K_BOLTZMANN * T0_KELVIN


@dataclass(frozen=True, eq=False)
class Selection:
    """Binary transmit vector ``x`` (per view column) and utilization matrix ``y`` (user x view)."""

    x: IntArray
    y: IntArray

    def __post_init__(self) -> None:
        x = np.array(self.x, dtype=np.int8)
        y = np.array(self.y, dtype=np.int8)
        if x.ndim != 1 or y.ndim != 2 or y.shape[1] != x.shape[0]:
            raise ShapeError(f"incompatible selection shapes x{x.shape} y{y.shape}")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    def transmitted_columns(self) -> npt.NDArray[np.intp]:
        return np.flatnonzero(self.x)

    def key(self) -> bytes:
        """Row-major bytes of ``y``; comparing keys orders selections lexicographically."""
        return self.y.tobytes()


@dataclass(frozen=True, eq=False)
class Allocation:
    """Per-view transmission time (s) and power (W)."""

    t: FloatArray
    p: FloatArray

    def __post_init__(self) -> None:
        t = np.array(self.t, dtype=float)
        p = np.array(self.p, dtype=float)
        if t.shape != p.shape or t.ndim != 1:
            raise ShapeError(f"incompatible allocation shapes t{t.shape} p{p.shape}")
        t.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "p", p)

    @classmethod
    def zeros(cls, n_views: int) -> Allocation:
        return cls(t=np.zeros(n_views), p=np.zeros(n_views))


@dataclass(frozen=True, slots=True)
class EnergyBreakdown:
    transmission: float
    server_synthesis: float
    user_synthesis: float
    total: float

    def to_dict(self) -> dict[str, float]:
        return {
            "E_total_J": self.total,
            "E_tx_J": self.transmission,
            "E_synth_server_J": self.server_synthesis,
            "E_synth_users_J": self.user_synthesis,
        }


class Constraint(IntEnum):
    """Feasibility constraints, numbered in the order they are checked."""

    TRANSMIT_BINARY = 1
    UTILIZE_BINARY = 2
    RIGHT_REFERENCE = 3
    LEFT_REFERENCE = 4
    TRANSMIT_COVERS_UTILIZE = 5
    TIME_NONNEGATIVE = 6
    FRAME_BUDGET = 7
    DECODING = 8


@dataclass(frozen=True, slots=True)
class Violation:
    constraint: Constraint
    user: int | None
    view: int | None
    detail: str


@dataclass(frozen=True)
class FeasibilityReport:
    violations: tuple[Violation, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return not self.violations

    def constraints(self) -> set[int]:
        return {v.constraint for v in self.violations}

    def __str__(self) -> str:
        if self.ok:
            return "ok"
        return "; ".join(
            f"({int(v.constraint)}) user={v.user} view={v.view}: {v.detail}"
            for v in self.violations
        )


def selection_from_rows(scenario: Scenario, rows: Sequence[Iterable[int]]) -> Selection:
    """Build a normalized selection from per-user sets of utilized grid indices."""
    if len(rows) != scenario.K:
        raise ShapeError(f"expected {scenario.K} user rows, got {len(rows)}")
    y = np.zeros((scenario.K, scenario.n_views), dtype=np.int8)
    for k, row in enumerate(rows):
        for g in row:
            if not scenario.grid.contains(g):
                raise InvalidViewError(f"grid index {g} is off the view grid")
            y[k, scenario.grid.column(g)] = 1
    return normalize_selection(y)


def normalize_selection(y: npt.ArrayLike) -> Selection:
    """Derive ``x_v = max_k y_kv``: a view is transmitted exactly when someone utilizes it."""
    y_arr = np.asarray(y, dtype=np.int8)
    return Selection(x=y_arr.max(axis=0), y=y_arr)


def direct_selection(scenario: Scenario) -> Selection:
    """Every user served by its own request."""
    y = np.zeros((scenario.K, scenario.n_views), dtype=np.int8)
    for k, r in enumerate(scenario.requests):
        y[k, scenario.grid.column(r)] = 1
    return normalize_selection(y)


def _require_selection_shape(scenario: Scenario, selection: Selection) -> None:
    expected = (scenario.K, scenario.n_views)
    if selection.y.shape != expected:
        raise ShapeError(f"selection y has shape {selection.y.shape}, expected {expected}")


def _require_allocation_shape(scenario: Scenario, allocation: Allocation) -> None:
    if allocation.t.shape != (scenario.n_views,):
        raise ShapeError(
            f"allocation has shape {allocation.t.shape}, expected ({scenario.n_views},)"
        )


def check_selection(scenario: Scenario, selection: Selection) -> FeasibilityReport:
    """Check the binary, reference and transmit-covers-utilize constraints."""
    _require_selection_shape(scenario, selection)
    grid = scenario.grid
    x, y = selection.x, selection.y
    violations: list[Violation] = []

    for col in np.flatnonzero((x != 0) & (x != 1)):
        view = grid.grid_at(int(col))
        violations.append(
            Violation(Constraint.TRANSMIT_BINARY, None, view, f"x={x[col]} not binary")
        )
    for k, col in zip(*np.nonzero((y != 0) & (y != 1)), strict=True):
        view = grid.grid_at(int(col))
        violations.append(
            Violation(Constraint.UTILIZE_BINARY, int(k), view, f"y={y[k, col]} not binary")
        )

    for k, r in enumerate(scenario.requests):
        left, right = reference_windows(grid, r)
        direct = int(y[k, grid.column(r)])
        right_sum = direct + sum(int(y[k, grid.column(g)]) for g in right)
        left_sum = direct + sum(int(y[k, grid.column(g)]) for g in left)
        if right_sum != 1:
            detail = f"direct + right references = {right_sum}"
            violations.append(Violation(Constraint.RIGHT_REFERENCE, k, r, detail))
        if left_sum != 1:
            detail = f"direct + left references = {left_sum}"
            violations.append(Violation(Constraint.LEFT_REFERENCE, k, r, detail))

    for k, col in zip(*np.nonzero(y > x[np.newaxis, :]), strict=True):
        violations.append(
            Violation(
                Constraint.TRANSMIT_COVERS_UTILIZE,
                int(k),
                grid.grid_at(int(col)),
                "utilized view is not transmitted",
            )
        )
    return FeasibilityReport(tuple(violations))


def check_allocation(
    scenario: Scenario,
    selection: Selection,
    allocation: Allocation,
    *,
    rtol: float = ALLOCATION_RTOL,
) -> FeasibilityReport:
    """Check time non-negativity, the frame budget and successful decoding."""
    _require_selection_shape(scenario, selection)
    _require_allocation_shape(scenario, allocation)
    grid = scenario.grid
    t, p = allocation.t, allocation.p
    violations: list[Violation] = []

    for col in np.flatnonzero(t < 0):
        view = grid.grid_at(int(col))
        violations.append(Violation(Constraint.TIME_NONNEGATIVE, None, view, f"t={t[col]:.3e} < 0"))
    for col in np.flatnonzero((t == 0) & (p != 0)):
        violations.append(
            Violation(
                Constraint.TIME_NONNEGATIVE,
                None,
                grid.grid_at(int(col)),
                f"power {p[col]:.3e} W with zero time",
            )
        )
    total = float(t.sum())
    if total > scenario.T * (1.0 + rtol):
        detail = f"sum t = {total:.9g} > T = {scenario.T}"
        violations.append(Violation(Constraint.FRAME_BUDGET, None, None, detail))

    required = scenario.R * scenario.T
    for k, col in zip(*np.nonzero(selection.y), strict=True):
        snr = p[col] * scenario.channels[k] / scenario.n0
        delivered = t[col] * scenario.B * np.log2(1.0 + snr) if snr > -1 else -np.inf
        if not delivered >= required * (1.0 - rtol):
            violations.append(
                Violation(
                    Constraint.DECODING,
                    int(k),
                    grid.grid_at(int(col)),
                    f"delivers {delivered:.6g} bits < {required:.6g}",
                )
            )
    return FeasibilityReport(tuple(violations))


def energy(scenario: Scenario, selection: Selection, allocation: Allocation) -> EnergyBreakdown:
    """Weighted sum energy: transmission + server synthesis + beta * user synthesis."""
    _require_selection_shape(scenario, selection)
    _require_allocation_shape(scenario, allocation)
    transmission = float(np.dot(allocation.t, allocation.p))
    synthesized = (selection.x != 0) & ~scenario.grid.original_mask()
    server = scenario.E_b * int(synthesized.sum())
    direct = np.array(
        [selection.y[k, scenario.grid.column(r)] for k, r in enumerate(scenario.requests)],
        dtype=float,
    )
    users = float(np.dot(1.0 - direct, scenario.E_u))
    return EnergyBreakdown(
        transmission=transmission,
        server_synthesis=server,
        user_synthesis=users,
        total=transmission + server + scenario.beta * users,
    )


@dataclass(frozen=True, slots=True)
class ViewLoad:
    view: int
    direct_users: tuple[int, ...]
    reference_users: tuple[int, ...]
    kind: Literal["unicast", "natural", "synthesis"]

    @property
    def users(self) -> int:
        return len(self.direct_users) + len(self.reference_users)


def multicast_profile(scenario: Scenario, selection: Selection) -> list[ViewLoad]:
    """Describe who each transmitted view serves and which multicast opportunity it realizes."""
    _require_selection_shape(scenario, selection)
    grid = scenario.grid
    loads: list[ViewLoad] = []
    for col in selection.transmitted_columns():
        g = grid.grid_at(int(col))
        users = np.flatnonzero(selection.y[:, col])
        direct = tuple(int(k) for k in users if scenario.requests[k] == g)
        reference = tuple(int(k) for k in users if scenario.requests[k] != g)
        kind: Literal["unicast", "natural", "synthesis"]
        if len(users) < 2:
            kind = "unicast"
        elif reference:
            kind = "synthesis"
        else:
            kind = "natural"
        loads.append(ViewLoad(g, direct, reference, kind))
    return loads
