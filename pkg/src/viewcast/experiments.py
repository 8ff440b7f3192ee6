"""Random scenarios, scheme sweeps over K / B / T, aggregation and CSV output."""

from __future__ import annotations

import dataclasses
import math
import time
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Literal

import numpy as np
import pandas as pd

from viewcast.baselines import baseline1, baseline2
from viewcast.dc_solver import DEFAULT_MAX_ITER, DEFAULT_TOL, solve_dc
from viewcast.exact_solver import solve_brute, solve_exact
from viewcast.io import (
    csv_bytes,
    get_logger,
    hash_bytes_md5,
    sizeof_bytes,
    utc_now_iso,
    write_csv,
    write_manifest,
)
from viewcast.model import Scenario, ViewGrid, thermal_noise
from viewcast.relax_round import solve_relax_round
from viewcast.solution import FLAG_FAILED, Solution

LOGGER = get_logger(__name__)

SweepParameter = Literal["K", "B", "T"]
SWEEP_PARAMETERS: tuple[str, ...] = ("K", "B", "T")
DEFAULT_SWEEP_VALUES: dict[str, tuple[float, ...]] = {
    "K": (2, 3, 4),
    "B": (5e6, 10e6, 15e6, 20e6),
    "T": (0.05, 0.10, 0.15, 0.20),
}
COLUMNS = [
    "seed",
    "K",
    "B_hz",
    "T_s",
    "scheme",
    "E_total_J",
    "E_tx_J",
    "E_synth_server_J",
    "E_synth_users_J",
    "n_views_tx",
    "solve_ms",
    "flags",
]
GROUP_KEYS = ["scheme", "K", "B_hz", "T_s"]


@dataclass(frozen=True, slots=True)
class GeneratorParams:
    """Parameters of the random instance generator; defaults are the reference operating point."""

    K: int = 10
    V: int = 5
    Q: int = 10
    delta: float = 1.0
    B: float = 10e6
    T: float = 0.1
    R: float = 10e6
    beta: float = 3.0
    E_b: float = 5e-7
    E_u: float | tuple[float, ...] = 5e-7
    n0: float | None = None
    channel_mean: float = 1e-3

    def grid(self) -> ViewGrid:
        return ViewGrid.from_delta(self.V, self.Q, self.delta)

    def with_value(self, parameter: str, value: float) -> GeneratorParams:
        if parameter not in SWEEP_PARAMETERS:
            raise ValueError(f"unknown sweep parameter {parameter!r}")
        cast = int(value) if parameter == "K" else float(value)
        return dataclasses.replace(self, **{parameter: cast})


@dataclass(frozen=True, slots=True)
class SolveOptions:
    workers: int = 1
    rho: float | None = None
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER


Scheme = Callable[[Scenario, SolveOptions], Solution]

SCHEMES: dict[str, Scheme] = {
    "exact": lambda s, o: solve_exact(s, workers=o.workers),
    "brute": lambda s, o: solve_brute(s, workers=o.workers),
    "relax": lambda s, o: solve_relax_round(s),
    "dc": lambda s, o: solve_dc(s, o.rho, max_iter=o.max_iter, tol=o.tol),
    "baseline1": lambda s, o: baseline1(s),
    "baseline2": lambda s, o: baseline2(s),
}
SCHEME_ALIASES = {"relax_round": "relax"}


def resolve_scheme(name: str) -> str:
    resolved = SCHEME_ALIASES.get(name, name)
    if resolved not in SCHEMES:
        raise ValueError(f"unknown scheme {name!r}; choose from {sorted(SCHEMES)}")
    return resolved


def run_scheme(name: str, scenario: Scenario, options: SolveOptions | None = None) -> Solution:
    return SCHEMES[resolve_scheme(name)](scenario, options or SolveOptions())


@dataclass(frozen=True)
class SweepSpec:
    parameter: SweepParameter
    values: tuple[float, ...]
    trials: int
    schemes: tuple[str, ...]
    base_seed: int = 0
    params: GeneratorParams = field(default_factory=GeneratorParams)

    def __post_init__(self) -> None:
        if self.parameter not in SWEEP_PARAMETERS:
            raise ValueError(f"sweep parameter must be one of {SWEEP_PARAMETERS}")
        if not self.values:
            raise ValueError("sweep needs at least one value")
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if not self.schemes:
            raise ValueError("sweep needs at least one scheme")
        object.__setattr__(self, "schemes", tuple(resolve_scheme(s) for s in self.schemes))

    def to_dict(self) -> dict[str, Any]:
        payload = dataclasses.asdict(self)
        payload["values"] = list(self.values)
        payload["schemes"] = list(self.schemes)
        return payload


@dataclass(frozen=True, slots=True)
class TrialRecord:
    seed: int
    K: int
    B_hz: float
    T_s: float
    scheme: str
    E_total_J: float
    E_tx_J: float
    E_synth_server_J: float
    E_synth_users_J: float
    n_views_tx: int
    solve_ms: float
    flags: str = ""

    @property
    def failed(self) -> bool:
        return FLAG_FAILED in self.flags.split(";")

    def to_row(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


def sample_channels(rng: np.random.Generator, count: int, mean: float) -> np.ndarray:
    """Channel power gains under Rayleigh fading: exponential with the given mean."""
    return rng.exponential(scale=mean, size=count)


def generate_scenario(seed: int, params: GeneratorParams) -> Scenario:
    """Draw channels, then uniform requests over the full view grid, from a PCG64 stream."""
    rng = np.random.default_rng(seed)
    grid = params.grid()
    channels = sample_channels(rng, params.K, params.channel_mean)
    requests = grid.first + rng.integers(0, grid.size, size=params.K)
    E_u = np.asarray(params.E_u, dtype=float)
    return Scenario(
        grid=grid,
        requests=tuple(int(r) for r in requests),
        channels=channels,
        R=params.R,
        T=params.T,
        B=params.B,
        E_b=params.E_b,
        E_u=E_u,
        beta=params.beta,
        n0=params.n0 if params.n0 is not None else thermal_noise(params.B),
    )


def _record(
    seed: int, scenario: Scenario, scheme: str, solution: Solution | None, elapsed_ms: float
) -> TrialRecord:
    if solution is None:
        return TrialRecord(
            seed=seed,
            K=scenario.K,
            B_hz=scenario.B,
            T_s=scenario.T,
            scheme=scheme,
            E_total_J=math.nan,
            E_tx_J=math.nan,
            E_synth_server_J=math.nan,
            E_synth_users_J=math.nan,
            n_views_tx=0,
            solve_ms=elapsed_ms,
            flags=FLAG_FAILED,
        )
    energy = solution.energy
    return TrialRecord(
        seed=seed,
        K=scenario.K,
        B_hz=scenario.B,
        T_s=scenario.T,
        scheme=scheme,
        E_total_J=energy.total,
        E_tx_J=energy.transmission,
        E_synth_server_J=energy.server_synthesis,
        E_synth_users_J=energy.user_synthesis,
        n_views_tx=len(solution.transmitted_views),
        solve_ms=elapsed_ms,
        flags=";".join(solution.diagnostics.flags),
    )


def run_trial(
    seed: int, params: GeneratorParams, schemes: Sequence[str], options: SolveOptions
) -> list[TrialRecord]:
    """One scenario, one record per scheme; solver failures become flagged records."""
    scenario = generate_scenario(seed, params)
    records: list[TrialRecord] = []
    for scheme in schemes:
        started = time.perf_counter()
        try:
            solution: Solution | None = run_scheme(scheme, scenario, options)
        except (ValueError, RuntimeError, ArithmeticError) as err:
            LOGGER.warning("seed %d scheme %s failed: %s", seed, scheme, err)
            solution = None
        elapsed_ms = (time.perf_counter() - started) * 1e3
        records.append(_record(seed, scenario, scheme, solution, elapsed_ms))
    return records


def run_sweep(
    spec: SweepSpec,
    *,
    workers: int = 1,
    options: SolveOptions | None = None,
    on_record: Callable[[TrialRecord], None] | None = None,
) -> list[TrialRecord]:
    """Run every (value, trial) cell; records come back ordered by value, seed, then scheme."""
    options = options or SolveOptions()
    tasks = [
        (spec.base_seed + trial, spec.params.with_value(spec.parameter, value))
        for value in spec.values
        for trial in range(spec.trials)
    ]
    LOGGER.info(
        "sweep over %s: %d values x %d trials x %d schemes",
        spec.parameter,
        len(spec.values),
        spec.trials,
        len(spec.schemes),
    )

    def work(task: tuple[int, GeneratorParams]) -> list[TrialRecord]:
        seed, params = task
        return run_trial(seed, params, spec.schemes, options)

    if workers <= 1:
        batches = [work(task) for task in tasks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            batches = list(pool.map(work, tasks))

    records = [record for batch in batches for record in batch]
    if on_record is not None:
        for record in records:
            on_record(record)
    failed = sum(1 for r in records if r.failed)
    if failed:
        LOGGER.warning("%d of %d sweep records failed", failed, len(records))
    return records


def records_frame(records: Sequence[TrialRecord]) -> pd.DataFrame:
    return pd.DataFrame([r.to_row() for r in records], columns=COLUMNS)


def write_results(
    records: Sequence[TrialRecord], path: str | Path, spec: SweepSpec | None = None
) -> Path:
    """Write the sweep CSV and a manifest.json next to it; returns the manifest path."""
    payload = write_csv(records_frame(records), path)
    meta: dict[str, Any] = {
        "file": Path(path).name,
        "rows": len(records),
        "bytes": sizeof_bytes(payload),
        "md5": hash_bytes_md5(payload),
        "written_at_utc": utc_now_iso(),
    }
    if spec is not None:
        meta["sweep"] = spec.to_dict()
    return write_manifest(path, meta)


def deterministic_digest(records: Sequence[TrialRecord]) -> str:
    """MD5 of the CSV without the timing column."""
    return hash_bytes_md5(csv_bytes(records_frame(records).drop(columns=["solve_ms"])))


def summarize(records: Sequence[TrialRecord]) -> pd.DataFrame:
    """Mean, standard error and count of E_total per (scheme, sweep point), excluding failures."""
    if not records:
        raise ValueError("summarize needs at least one record")
    df = records_frame(records)
    failed = df["flags"].map(lambda f: FLAG_FAILED in str(f).split(";"))
    ok = df[~failed]
    grouped = ok.groupby(GROUP_KEYS, sort=True)
    summary = grouped["E_total_J"].agg(mean="mean", std="std", count="count")
    summary["stderr"] = (summary["std"] / np.sqrt(summary["count"])).fillna(0.0)
    summary["solve_ms_mean"] = grouped["solve_ms"].mean()
    summary["excluded"] = 0
    if failed.any():
        excluded = df[failed].groupby(GROUP_KEYS, sort=True).size()
        summary["excluded"] = excluded.reindex(summary.index, fill_value=0).astype(int)
        for cell in excluded.index.difference(summary.index):
            cell_keys = dict(zip(GROUP_KEYS, cell, strict=True))
            LOGGER.warning("every record failed for %s; no aggregate", cell_keys)
    return summary.drop(columns=["std"]).reset_index()
