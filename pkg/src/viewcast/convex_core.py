"""Log-barrier interior-point solver for the relaxed selection program.

The program is written in epigraph form over normalized variables

    tau_v = t_v / T,  e_v (transmission energy bound),  y_kv,  z_v (bound on max_k y_kv)

with energies divided by a reference scale ``S``. Each active (user, view) pair contributes

    tau_v * log(1 + e_v / (a_k tau_v)) - kappa * y_kv > 0,   a_k = n0 T / (h_k S),
    kappa = (R / B) ln 2,

which is the decoding constraint written through a concave perspective of ``log1p``.
The reference equalities stay as linear constraints in the Newton KKT system.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt
import scipy.linalg

from viewcast.allocator import optimal_allocation
from viewcast.io import get_logger
from viewcast.model import Scenario, direct_selection, reference_windows
from viewcast.numerics import ConvergenceError

LOGGER = get_logger(__name__)
LN2 = math.log(2.0)

DIRECT_SHARE = 0.98
IDLE_SHARE = 0.01
WINDOW_MASS = 1e-2
WARM_BLEND = 0.9
NEWTON_REGION = 1e-6
STALL_RATIO = 0.25

FloatArray = npt.NDArray[np.float64]
IndexArray = npt.NDArray[np.intp]


@dataclass(frozen=True, slots=True)
class BarrierSettings:
    """Barrier schedule and Newton line-search parameters.

    ``mu0=None`` starts the barrier weight at the objective magnitude of the starting point
    divided by the number of inequalities.
    """

    mu0: float | None = None
    mu_factor: float = 20.0
    gap_tol: float = 1e-9
    newton_tol: float = 1e-14
    max_newton: int = 500
    alpha: float = 0.01
    beta: float = 0.5
    min_step: float = 1e-14
    tau_floor: float = 1e-12
    y_zero: float = 1e-10
    stationarity_tol: float = 1e-6
    primal_tol: float = 1e-8


@dataclass(frozen=True, eq=False)
class ConvexViewProgram:
    """One member of the relaxed program family: shared constraints, linear cost in ``y``.

    Variables are laid out as ``[tau (n_views), e (n_views), y (n_pairs), z (n_z)]`` where
    ``views`` are the grid indices some user may utilize and pairs are (user, view) entries
    of each user's request and reference windows.
    """

    scenario: Scenario
    views: tuple[int, ...]
    pair_user: IndexArray
    pair_grid: IndexArray
    pair_view: IndexArray
    pair_right: npt.NDArray[np.bool_]
    forced_users: tuple[int, ...]
    z_of_view: IndexArray
    y_cost: FloatArray
    constant: float
    scale: float
    kappa: float
    pair_a: FloatArray
    cost: FloatArray
    eq_matrix: FloatArray
    eq_rhs: FloatArray
    settings: BarrierSettings = field(default_factory=BarrierSettings)

    @property
    def n_views(self) -> int:
        return len(self.views)

    @property
    def n_pairs(self) -> int:
        return int(self.pair_user.shape[0])

    @property
    def n_z(self) -> int:
        return int((self.z_of_view >= 0).sum())

    @property
    def n_vars(self) -> int:
        return 2 * self.n_views + self.n_pairs + self.n_z

    @property
    def n_inequalities(self) -> int:
        with_z = int((self.z_of_view[self.pair_view] >= 0).sum())
        return self.n_views + 1 + 2 * self.n_pairs + with_z

    def active_pairs(self) -> list[tuple[int, int]]:
        return [(int(k), int(g)) for k, g in zip(self.pair_user, self.pair_grid, strict=True)]

    def objective(self, x: FloatArray) -> float:
        """Program objective in joules at internal point ``x``."""
        return float(self.scale * (self.cost @ x) + self.constant)


@dataclass(frozen=True, eq=False)
class ConvexSolution:
    """Point returned by the barrier method with its optimality residuals."""

    t: FloatArray
    y: FloatArray
    objective: float
    stationarity: float
    primal_residual: float
    complementarity: float
    iterations: int
    mu: float
    raw: FloatArray


def build_program(
    scenario: Scenario,
    linear_y: npt.ArrayLike | None = None,
    constant: float = 0.0,
    *,
    settings: BarrierSettings | None = None,
) -> ConvexViewProgram:
    """Assemble the program; ``linear_y`` holds per (user, view) cost coefficients in joules."""
    grid = scenario.grid
    users: list[int] = []
    grids: list[int] = []
    right_flags: list[bool] = []
    forced: list[int] = []
    for k, r in enumerate(scenario.requests):
        left, right = reference_windows(grid, r)
        if not left or not right:
            forced.append(k)
            members: Sequence[int] = (r,)
        else:
            members = (r, *left, *right)
        for g in members:
            users.append(k)
            grids.append(g)
            right_flags.append(g > r)

    views = tuple(sorted(set(grids)))
    position = {g: i for i, g in enumerate(views)}
    pair_user = np.array(users, dtype=np.intp)
    pair_grid = np.array(grids, dtype=np.intp)
    pair_view = np.array([position[g] for g in grids], dtype=np.intp)
    pair_right = np.array(right_flags, dtype=bool)

    # z bounds max_k y_kv for the server synthesis cost; without that cost it has no use
    z_of_view = np.full(len(views), -1, dtype=np.intp)
    n_z = 0
    for i, g in enumerate(views):
        if scenario.E_b > 0 and not grid.is_original(g):
            z_of_view[i] = n_z
            n_z += 1

    if linear_y is None:
        y_cost = np.zeros(len(users))
    else:
        coefficients = np.asarray(linear_y, dtype=float)
        if coefficients.shape != (scenario.K, scenario.n_views):
            raise ValueError(
                f"linear_y must have shape {(scenario.K, scenario.n_views)}, "
                f"got {coefficients.shape}"
            )
        y_cost = coefficients[pair_user, pair_grid - grid.first]

    scale = _reference_scale(scenario)
    n_views, n_pairs = len(views), len(users)
    n_vars = 2 * n_views + n_pairs + n_z
    cost = np.zeros(n_vars)
    cost[n_views : 2 * n_views] = 1.0
    cost[2 * n_views + n_pairs :] = scenario.E_b / scale
    y_slice = cost[2 * n_views : 2 * n_views + n_pairs]
    y_slice += np.where(pair_right, scenario.beta * scenario.E_u[pair_user], 0.0) / scale
    y_slice += y_cost / scale

    rows: list[FloatArray] = []
    for k in range(scenario.K):
        own = np.flatnonzero(pair_user == k)
        if k in forced:
            row = np.zeros(n_vars)
            row[2 * n_views + own] = 1.0
            rows.append(row)
            continue
        r = scenario.requests[k]
        for side in (pair_grid[own] > r, pair_grid[own] < r):
            row = np.zeros(n_vars)
            row[2 * n_views + own[(pair_grid[own] == r) | side]] = 1.0
            rows.append(row)
    eq_matrix = np.vstack(rows)

    return ConvexViewProgram(
        scenario=scenario,
        views=views,
        pair_user=pair_user,
        pair_grid=pair_grid,
        pair_view=pair_view,
        pair_right=pair_right,
        forced_users=tuple(forced),
        z_of_view=z_of_view,
        y_cost=y_cost,
        constant=float(constant),
        scale=scale,
        kappa=scenario.R * LN2 / scenario.B,
        pair_a=scenario.n0 * scenario.T / (scenario.channels[pair_user] * scale),
        cost=cost,
        eq_matrix=eq_matrix,
        eq_rhs=np.ones(eq_matrix.shape[0]),
        settings=settings or BarrierSettings(),
    )


def _reference_scale(scenario: Scenario) -> float:
    selection = direct_selection(scenario)
    _, e_t, _ = optimal_allocation(scenario, selection)
    synthesized = sum(1 for r in set(scenario.requests) if not scenario.grid.is_original(r))
    return e_t + scenario.E_b * (synthesized + 1) + scenario.beta * float(scenario.E_u.sum())


class _Layout:
    """Index bookkeeping for the internal variable vector."""

    def __init__(self, program: ConvexViewProgram) -> None:
        nv, n_pairs = program.n_views, program.n_pairs
        self.nv = nv
        self.tau = np.arange(nv)
        self.e = nv + np.arange(nv)
        self.y = 2 * nv + np.arange(n_pairs)
        self.pair_tau = program.pair_view
        self.pair_e = nv + program.pair_view
        z_pos = program.z_of_view[program.pair_view]
        self.zmask = z_pos >= 0
        self.zpair_y = self.y[self.zmask]
        self.zpair_zpos = z_pos[self.zmask]
        self.zpair_z = 2 * nv + n_pairs + self.zpair_zpos
        self.z = 2 * nv + n_pairs + np.arange(program.n_z)


@dataclass
class _Terms:
    value: float
    grad: FloatArray | None = None
    hess: FloatArray | None = None


def _perspective(program: ConvexViewProgram, lay: _Layout, x: FloatArray):
    tau = x[lay.pair_tau]
    e = x[lay.pair_e]
    y = x[lay.y]
    a = program.pair_a
    if np.any(tau <= 0) or np.any(e <= 0):
        return None
    s = e / (a * tau)
    log_term = np.log1p(s)
    u = tau * log_term - program.kappa * y
    if np.any(u <= 0) or not np.all(np.isfinite(u)):
        return None
    return tau, e, s, log_term, u


def _barrier(
    program: ConvexViewProgram, lay: _Layout, x: FloatArray, *, derivatives: bool
) -> _Terms | None:
    """Log barrier of all inequalities; None when ``x`` is outside the interior."""
    tau = x[lay.tau]
    slack_tau = tau - program.settings.tau_floor
    slack_budget = 1.0 - tau.sum()
    y = x[lay.y]
    slack_z = x[lay.zpair_z] - x[lay.zpair_y]
    if slack_budget <= 0 or np.any(slack_tau <= 0) or np.any(y <= 0) or np.any(slack_z <= 0):
        return None
    persp = _perspective(program, lay, x)
    if persp is None:
        return None
    tau_p, e_p, s, log_term, u = persp
    value = -(
        np.log(slack_tau).sum()
        + math.log(slack_budget)
        + np.log(y).sum()
        + np.log(slack_z).sum()
        + np.log(u).sum()
    )
    if not derivatives:
        return _Terms(float(value))

    n = x.shape[0]
    kappa = program.kappa
    grad = np.zeros(n)
    hess = np.zeros((n, n))

    grad[lay.tau] += -1.0 / slack_tau + 1.0 / slack_budget
    hess[lay.tau, lay.tau] += 1.0 / slack_tau**2
    hess[np.ix_(lay.tau, lay.tau)] += 1.0 / slack_budget**2

    grad[lay.y] += -1.0 / y
    hess[lay.y, lay.y] += 1.0 / y**2

    w = 1.0 / slack_z
    np.add.at(grad, lay.zpair_z, -w)
    np.add.at(grad, lay.zpair_y, w)
    np.add.at(hess, (lay.zpair_z, lay.zpair_z), w**2)
    hess[lay.zpair_y, lay.zpair_y] += w**2
    np.add.at(hess, (lay.zpair_z, lay.zpair_y), -(w**2))
    np.add.at(hess, (lay.zpair_y, lay.zpair_z), -(w**2))

    denom = program.pair_a * tau_p + e_p
    g_tau = log_term - s / (1.0 + s)
    g_e = tau_p / denom
    h_tt = -(e_p**2) / (tau_p * denom**2)
    h_te = e_p / denom**2
    h_ee = -tau_p / denom**2
    inv_u = 1.0 / u
    inv_u2 = inv_u**2

    np.add.at(grad, lay.pair_tau, -g_tau * inv_u)
    np.add.at(grad, lay.pair_e, -g_e * inv_u)
    grad[lay.y] += kappa * inv_u

    it, ie, iy = lay.pair_tau, lay.pair_e, lay.y
    np.add.at(hess, (it, it), g_tau**2 * inv_u2 - h_tt * inv_u)
    np.add.at(hess, (ie, ie), g_e**2 * inv_u2 - h_ee * inv_u)
    cross_te = g_tau * g_e * inv_u2 - h_te * inv_u
    np.add.at(hess, (it, ie), cross_te)
    np.add.at(hess, (ie, it), cross_te)
    cross_ty = -kappa * g_tau * inv_u2
    np.add.at(hess, (it, iy), cross_ty)
    np.add.at(hess, (iy, it), cross_ty)
    cross_ey = -kappa * g_e * inv_u2
    np.add.at(hess, (ie, iy), cross_ey)
    np.add.at(hess, (iy, ie), cross_ey)
    hess[iy, iy] += kappa**2 * inv_u2
    return _Terms(float(value), grad, hess)


def initial_point(program: ConvexViewProgram) -> FloatArray:
    """A strictly feasible point near direct service.

    Requested views keep most of their all-direct time share and every other view splits a
    small remainder. Window entries get just enough utilization to stay interior, so the
    transmission bounds start close to the direct-service energy.
    """
    scenario = program.scenario
    lay = _Layout(program)
    x = np.zeros(program.n_vars)

    allocation, _, _ = optimal_allocation(scenario, direct_selection(scenario))
    share = np.array([allocation.t[scenario.grid.column(g)] / scenario.T for g in program.views])
    idle = share <= 0
    tau = DIRECT_SHARE * share
    if idle.any():
        tau[idle] = IDLE_SHARE / int(idle.sum())
    tau = np.maximum(tau, 1e3 * program.settings.tau_floor)
    if tau.sum() >= 1.0:
        tau *= (DIRECT_SHARE + IDLE_SHARE) / tau.sum()
    x[lay.tau] = tau

    y = np.zeros(program.n_pairs)
    for k, r in enumerate(scenario.requests):
        own = np.flatnonzero(program.pair_user == k)
        if k in program.forced_users:
            y[own] = 1.0
            continue
        grids = program.pair_grid[own]
        sides = (grids < r, grids > r)
        window_tau = tau[program.pair_view[own[grids != r]]]
        counts = [int(side.sum()) for side in sides]
        # every window entry keeps kappa * y / tau <= 1
        mass = min(WINDOW_MASS, min(counts) * float(window_tau.min()) / program.kappa)
        y[own[grids == r]] = 1.0 - mass
        for side, count in zip(sides, counts, strict=True):
            y[own[side]] = mass / count
    x[lay.y] = y

    tau_p = x[lay.pair_tau]
    with np.errstate(over="ignore"):
        need = program.pair_a * tau_p * np.expm1(program.kappa * y / tau_p)
    if not np.all(np.isfinite(need)):
        raise ConvergenceError(
            "transmission energy of the starting point overflows",
            max_exponent=float(np.max(program.kappa * y / tau_p)),
        )
    e = np.zeros(program.n_views)
    np.maximum.at(e, program.pair_view, need)
    x[lay.e] = 1.5 * e

    z = np.zeros(program.n_z)
    np.maximum.at(z, lay.zpair_zpos, y[lay.zmask])
    x[lay.z] = z + 0.5
    if _barrier(program, lay, x, derivatives=False) is None:
        raise ConvergenceError("no strictly feasible starting point")
    return x


def _newton_direction(
    hess: FloatArray, grad: FloatArray, A: FloatArray, residual: FloatArray
) -> FloatArray:
    """Equality-constrained Newton step, solved with a Jacobi-equilibrated KKT matrix."""
    n, m = hess.shape[0], A.shape[0]
    d = 1.0 / np.sqrt(np.diag(hess))
    scaled_a = A * d[np.newaxis, :]
    rows = 1.0 / np.linalg.norm(scaled_a, axis=1)
    scaled_a *= rows[:, np.newaxis]
    kkt = np.zeros((n + m, n + m))
    kkt[:n, :n] = hess * np.outer(d, d)
    kkt[:n, n:] = scaled_a.T
    kkt[n:, :n] = scaled_a
    rhs = np.concatenate([-d * grad, rows * residual])
    try:
        sol = scipy.linalg.solve(kkt, rhs, assume_a="sym", check_finite=False)
    except (scipy.linalg.LinAlgError, ValueError):
        sol = scipy.linalg.lstsq(kkt, rhs, check_finite=False)[0]
    if not np.all(np.isfinite(sol)):
        raise ConvergenceError("Newton system produced a non-finite step")
    return d * sol[:n]


def _stationarity(program: ConvexViewProgram, grad_barrier: FloatArray, mu: float) -> float:
    grad_f = program.cost + mu * grad_barrier
    nu = scipy.linalg.lstsq(program.eq_matrix.T, -grad_f, check_finite=False)[0]
    residual = grad_f + program.eq_matrix.T @ nu
    return float(np.linalg.norm(residual) / (1.0 + np.linalg.norm(program.cost)))


def solve_program(
    program: ConvexViewProgram,
    *,
    start: ConvexSolution | None = None,
    mu0: float | None = None,
) -> ConvexSolution:
    """Minimize the program by the barrier method; ``start`` warm-starts from a prior solve.

    The outer loop stops once the duality gap ``m * mu`` is below ``gap_tol`` times the
    transmission part of the objective, which bounds both the epigraph slack and the gap
    relative to the full objective. The returned point is checked against the stationarity
    and primal residual bounds; a point that misses them raises ``ConvergenceError``.
    """
    cfg = program.settings
    lay = _Layout(program)
    x = initial_point(program)
    if start is not None and start.raw.shape == x.shape:
        x = WARM_BLEND * start.raw + (1.0 - WARM_BLEND) * x
    m = program.n_inequalities
    if mu0 is not None:
        mu = mu0
    elif cfg.mu0 is not None:
        mu = cfg.mu0
    else:
        mu = float(np.abs(program.cost) @ x) / m
    steps = 0

    while True:
        x, steps = _center(program, lay, x, mu, steps)
        transmission = float(x[lay.e].sum())
        LOGGER.debug(
            "centered at mu=%.1e: objective=%.9e gap=%.1e steps=%d",
            mu,
            program.objective(x),
            m * mu,
            steps,
        )
        if m * mu <= cfg.gap_tol * transmission:
            break
        mu /= cfg.mu_factor

    final = _barrier(program, lay, x, derivatives=True)
    if final is None or final.grad is None:
        raise ConvergenceError("barrier iterate left the interior", mu=mu, steps=steps)
    solution = _extract(program, lay, x, mu, steps, final.grad)
    if solution.stationarity > cfg.stationarity_tol or solution.primal_residual > cfg.primal_tol:
        raise ConvergenceError(
            "barrier point misses the optimality bounds",
            stationarity=solution.stationarity,
            primal_residual=solution.primal_residual,
            mu=mu,
            steps=steps,
        )
    return solution


def _center(
    program: ConvexViewProgram, lay: _Layout, x: FloatArray, mu: float, steps: int
) -> tuple[FloatArray, int]:
    """Damped Newton on ``cost @ x / mu + barrier(x)``; returns the centered point."""
    cfg = program.settings
    A, b = program.eq_matrix, program.eq_rhs
    previous = math.inf
    while True:
        terms = _barrier(program, lay, x, derivatives=True)
        if terms is None or terms.grad is None or terms.hess is None:
            raise ConvergenceError("barrier iterate left the interior", mu=mu, steps=steps)
        grad = program.cost / mu + terms.grad
        dx = _newton_direction(terms.hess, grad, A, b - A @ x)
        decrement = max(float(dx @ terms.hess @ dx), 0.0)
        if decrement / 2.0 <= cfg.newton_tol:
            return x, steps
        if decrement / 2.0 <= NEWTON_REGION and decrement > STALL_RATIO * previous:
            # roundoff floor of the Newton system
            return x, steps
        previous = decrement
        steps += 1
        if steps > cfg.max_newton:
            raise ConvergenceError(
                f"barrier method exceeded {cfg.max_newton} Newton steps",
                mu=mu,
                decrement=decrement,
                primal_residual=float(np.linalg.norm(A @ x - b)),
                gap=program.n_inequalities * mu,
            )
        step = _line_search(program, lay, x, dx, mu, terms.value, float(grad @ dx), decrement)
        if step is None:
            if decrement / 2.0 <= NEWTON_REGION:
                LOGGER.debug("line search stalled at mu=%.1e after %d steps", mu, steps)
                return x, steps
            raise ConvergenceError(
                "line search stalled away from the central path",
                mu=mu,
                decrement=decrement,
                steps=steps,
            )
        x = x + step * dx


def _line_search(
    program: ConvexViewProgram,
    lay: _Layout,
    x: FloatArray,
    dx: FloatArray,
    mu: float,
    value: float,
    slope: float,
    decrement: float,
) -> float | None:
    # merit change is formed as a difference so it survives a large cost / mu term
    cfg = program.settings
    linear = float(program.cost @ dx) / mu
    step = 1.0
    while step >= cfg.min_step:
        trial = _barrier(program, lay, x + step * dx, derivatives=False)
        if trial is not None:
            if decrement / 2.0 <= NEWTON_REGION:
                return step
            change = step * linear + (trial.value - value)
            if change <= cfg.alpha * step * slope:
                return step
        step *= cfg.beta
    return None


def _extract(
    program: ConvexViewProgram,
    lay: _Layout,
    x: FloatArray,
    mu: float,
    steps: int,
    grad_barrier: FloatArray,
) -> ConvexSolution:
    scenario = program.scenario
    grid = scenario.grid
    t = np.zeros(scenario.n_views)
    y = np.zeros((scenario.K, scenario.n_views))
    y_pairs = x[lay.y]
    y[program.pair_user, program.pair_grid - grid.first] = y_pairs
    for i, g in enumerate(program.views):
        col = grid.column(g)
        if np.all(y[:, col] < program.settings.y_zero):
            y[:, col] = 0.0
        else:
            t[col] = scenario.T * x[lay.tau[i]]
    return ConvexSolution(
        t=t,
        y=y,
        objective=program.objective(x),
        stationarity=_stationarity(program, grad_barrier, mu),
        primal_residual=float(np.linalg.norm(program.eq_matrix @ x - program.eq_rhs)),
        complementarity=program.n_inequalities * mu,
        iterations=steps,
        mu=mu,
        raw=x,
    )


def perspective_objective(t: npt.ArrayLike, y: npt.ArrayLike, scenario: Scenario) -> float:
    """Transmission bound, server synthesis and weighted user synthesis evaluated directly.

    A view with zero time contributes 0 when nobody utilizes it and +inf otherwise.
    """
    t_arr = np.asarray(t, dtype=float)
    y_arr = np.asarray(y, dtype=float)
    grid = scenario.grid
    scale = (scenario.n0 / scenario.channels)[:, np.newaxis]
    exponent_rate = scenario.R * scenario.T * LN2 / scenario.B

    transmission = 0.0
    for col in range(scenario.n_views):
        column = y_arr[:, col]
        if t_arr[col] <= 0:
            if np.any(column > 0):
                return math.inf
            continue
        per_user = scale[:, 0] * np.expm1(exponent_rate * column / t_arr[col])
        transmission += t_arr[col] * float(per_user.max())

    synthesized = ~grid.original_mask()
    server = scenario.E_b * float(y_arr[:, synthesized].max(axis=0, initial=0.0).sum())
    users = 0.0
    for k, r in enumerate(scenario.requests):
        right = reference_windows(grid, r)[1]
        users += float(scenario.E_u[k]) * sum(float(y_arr[k, grid.column(g)]) for g in right)
    return transmission + server + scenario.beta * users
