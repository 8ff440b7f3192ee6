"""Scalar kernels: principal-branch Lambert W and guarded monotone bisection."""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass

# 1/e split into the nearest double and its remainder, so e*x + 1 keeps full precision
# next to the branch point.
INV_E_HI = 0.36787944117144233
INV_E_LO = -1.2428753672788363e-17
BRANCH_ZONE = 1e-6
BRANCH_SLACK = 1e-15
HALLEY_MAX_ITER = 50


class LambertDomainError(ValueError):
    """Raised when W0 is requested below the branch point -1/e."""


class BracketError(ValueError):
    """Raised when a bisection bracket does not straddle a root."""


class ConvergenceError(RuntimeError):
    """Raised when an iterative method exhausts its iteration budget."""

    def __init__(self, message: str, *, bracket: tuple[float, float] | None = None, **info):
        super().__init__(message)
        self.bracket = bracket
        self.info = info


def lambert_w0(x: float) -> float:
    """Principal branch W0(x) for x >= -1/e, so that w * exp(w) == x and w >= -1."""
    x = float(x)
    if math.isnan(x):
        raise LambertDomainError("W0 of NaN")
    if x == 0.0:
        return 0.0
    offset = math.e * ((x + INV_E_HI) + INV_E_LO)
    return _w0(x, offset)


def w0_shifted(d: float) -> float:
    """Return W0((d - 1) / e) for d >= 0.

    Callers whose argument is naturally written as ``u / e - 1 / e`` pass ``u`` directly and
    keep the digits that forming the sum would cancel near the branch point.
    """
    d = float(d)
    return _w0((d - 1.0) / math.e, d)


def _w0(x: float, d: float) -> float:
    if math.isnan(d):
        raise LambertDomainError("W0 of NaN")
    if d < 0.0:
        if d >= -BRANCH_SLACK:
            return -1.0
        raise LambertDomainError(f"W0 undefined below -1/e (offset {d:.3e})")
    if d == 0.0:
        return -1.0
    if math.isinf(d):
        return math.inf
    if d < BRANCH_ZONE:
        return _branch_series(math.sqrt(2.0 * d))

    if x == 0.0:
        return 0.0
    if x < -0.25:
        w = _branch_series(math.sqrt(2.0 * d))
    elif x < 3.0:
        w = math.log1p(x)
    else:
        l1 = math.log(x)
        l2 = math.log(l1)
        w = l1 - l2 + l2 / l1
    return _halley(x, w)


def _branch_series(p: float) -> float:
    # Expansion of W0 about -1/e in p = sqrt(2 (e x + 1)).
    return -1.0 + p * (
        1.0
        + p
        * (
            -1.0 / 3.0
            + p * (11.0 / 72.0 + p * (-43.0 / 540.0 + p * (769.0 / 17280.0 - p * 221.0 / 8505.0)))
        )
    )


def _halley(x: float, w: float) -> float:
    previous = math.inf
    for _ in range(HALLEY_MAX_ITER):
        # residual scaled by exp(-w): w - x exp(-w)
        f = w - x * math.exp(-w)
        wp1 = w + 1.0
        step = f / (wp1 - (w + 2.0) * f / (2.0 * wp1))
        w_next = w - step
        # rounding in f is amplified by 1/(w + 1) close to the branch point
        if abs(step) <= 4e-16 * (1.0 + abs(w_next)) / min(1.0, abs(wp1)):
            return w_next
        if abs(step) >= previous and abs(step) < 1e-12:
            return w_next
        previous = abs(step)
        w = w_next
    raise ConvergenceError(f"Halley iteration for W0({x!r}) did not settle", last=w)


@dataclass(frozen=True, slots=True)
class BisectionSpec:
    lower: float
    upper: float
    tol: float = 1e-12
    max_iter: int = 200


def bisect(residual: Callable[[float], float], spec: BisectionSpec) -> float:
    """Find a root of a monotone ``residual`` inside ``[spec.lower, spec.upper]``."""
    lo, hi = spec.lower, spec.upper
    if lo > hi:
        lo, hi = hi, lo
    f_lo = residual(lo)
    if abs(f_lo) <= spec.tol:
        return lo
    f_hi = residual(hi)
    if abs(f_hi) <= spec.tol:
        return hi
    if (f_lo > 0) == (f_hi > 0):
        raise BracketError(
            f"no sign change on [{lo:.6g}, {hi:.6g}]: residuals {f_lo:.3e}, {f_hi:.3e}"
        )

    for _ in range(spec.max_iter):
        mid = 0.5 * (lo + hi)
        f_mid = residual(mid)
        if abs(f_mid) <= spec.tol:
            return mid
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    raise ConvergenceError(
        f"bisection did not reach |residual| <= {spec.tol:.1e} in {spec.max_iter} iterations",
        bracket=(lo, hi),
    )
