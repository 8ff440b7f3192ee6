"""Process settings from the environment and experiment files in YAML."""

from __future__ import annotations

import os
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Final, Literal

import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from viewcast.experiments import (
    DEFAULT_SWEEP_VALUES,
    GeneratorParams,
    SolveOptions,
    SweepSpec,
    generate_scenario,
    resolve_scheme,
)
from viewcast.model import Scenario, ViewGrid

load_dotenv(override=False)

LOG_LEVELS: Final[tuple[str, ...]] = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")
DEFAULT_SCHEMES: Final[tuple[str, ...]] = ("relax", "dc", "baseline1", "baseline2")


class ConfigError(ValueError):
    """Raised when an experiment file or environment setting is invalid."""


@dataclass(frozen=True)
class Settings:
    WORKERS: int = 1
    LOG_LEVEL: str = "INFO"
    RUN_LOG: str = "data/logs/solves.jsonl"

    @classmethod
    def from_env(cls) -> Settings:
        raw_workers = os.getenv("VIEWCAST_WORKERS", "1")
        try:
            workers = int(raw_workers)
        except ValueError as err:
            raise ConfigError(f"VIEWCAST_WORKERS must be an integer, got {raw_workers!r}") from err
        return cls(
            WORKERS=workers,
            LOG_LEVEL=os.getenv("VIEWCAST_LOG_LEVEL", "INFO").upper(),
            RUN_LOG=os.getenv("VIEWCAST_RUN_LOG", "data/logs/solves.jsonl"),
        )

    def validate(self) -> None:
        if self.WORKERS < 1:
            raise ConfigError(f"VIEWCAST_WORKERS must be >= 1, got {self.WORKERS}")
        if self.LOG_LEVEL not in LOG_LEVELS:
            raise ConfigError(f"VIEWCAST_LOG_LEVEL must be one of {LOG_LEVELS}")


def get_settings() -> Settings:
    settings = Settings.from_env()
    settings.validate()
    return settings


class SweepSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    parameter: Literal["K", "B", "T"]
    values: list[float] | None = None
    trials: int = Field(default=100, ge=1)
    schemes: list[str] = Field(default_factory=lambda: list(DEFAULT_SCHEMES))
    base_seed: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _known_schemes(self) -> SweepSection:
        for name in self.schemes:
            resolve_scheme(name)
        if not self.schemes:
            raise ValueError("schemes must not be empty")
        return self


class DcSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    rho: float | None = Field(default=None, gt=0)
    tol: float = Field(default=1e-6, gt=0)
    max_iter: int = Field(default=50, ge=1)


class ExperimentConfig(BaseModel):
    """Schema of an experiment file; omitted keys take the reference operating point."""

    model_config = ConfigDict(extra="forbid")

    V: int = Field(default=5, ge=2)
    Q: int = Field(default=10, ge=2)
    delta: float = Field(default=1.0, ge=1.0)
    K: int | None = Field(default=None, ge=1)
    B: float = Field(default=10e6, gt=0)
    T: float = Field(default=0.1, gt=0)
    R: float = Field(default=10e6, gt=0)
    beta: float = Field(default=3.0, ge=1.0)
    E_b: float = Field(default=5e-7, ge=0)
    E_u: float | list[float] = 5e-7
    n0: float | None = Field(default=None, gt=0)
    channel_mean: float = Field(default=1e-3, gt=0)
    requests: list[float] | None = None
    channels: list[float] | None = None
    seed: int = Field(default=0, ge=0)
    sweep: SweepSection | None = None
    dc: DcSection = Field(default_factory=DcSection)

    @model_validator(mode="after")
    def _consistent(self) -> ExperimentConfig:
        steps = Fraction(self.delta).limit_denominator(10**6) * self.Q
        if steps.denominator != 1:
            raise ValueError(f"delta={self.delta} must be a multiple of 1/Q (Q={self.Q})")
        if (self.requests is None) != (self.channels is None):
            raise ValueError("requests and channels must be given together")
        if self.requests is not None and self.channels is not None:
            if len(self.requests) != len(self.channels):
                raise ValueError("requests and channels must have the same length")
            if not self.requests:
                raise ValueError("requests must not be empty")
            if self.K is not None and self.K != len(self.requests):
                raise ValueError(f"K={self.K} but {len(self.requests)} requests were given")
            if any(h <= 0 for h in self.channels):
                raise ValueError("channels must be > 0")
        if isinstance(self.E_u, list):
            if any(e < 0 for e in self.E_u):
                raise ValueError("E_u must be >= 0")
            if len(self.E_u) != self.user_count:
                raise ValueError(f"E_u lists {len(self.E_u)} users, expected {self.user_count}")
        elif self.E_u < 0:
            raise ValueError("E_u must be >= 0")
        if isinstance(self.E_u, list) and self.sweep is not None and self.sweep.parameter == "K":
            raise ValueError("a K sweep needs a scalar E_u")
        return self

    @property
    def user_count(self) -> int:
        if self.requests is not None:
            return len(self.requests)
        return self.K if self.K is not None else GeneratorParams().K

    def generator_params(self) -> GeneratorParams:
        return GeneratorParams(
            K=self.user_count,
            V=self.V,
            Q=self.Q,
            delta=self.delta,
            B=self.B,
            T=self.T,
            R=self.R,
            beta=self.beta,
            E_b=self.E_b,
            E_u=tuple(self.E_u) if isinstance(self.E_u, list) else self.E_u,
            n0=self.n0,
            channel_mean=self.channel_mean,
        )


@dataclass(frozen=True, eq=False)
class RunConfig:
    """A parsed experiment file: the instance to solve, an optional sweep and solver options."""

    source: Path
    experiment: ExperimentConfig
    scenario: Scenario
    sweep: SweepSpec | None
    options: SolveOptions


def _format_validation(err: ValidationError) -> str:
    parts = []
    for issue in err.errors():
        location = ".".join(str(p) for p in issue["loc"]) or "<root>"
        parts.append(f"{location}: {issue['msg']}")
    return "; ".join(parts)


def load_experiment(path: str | Path) -> ExperimentConfig:
    source = Path(path)
    if not source.exists():
        raise ConfigError(f"config file not found: {source}")
    try:
        raw = yaml.safe_load(source.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as err:
        raise ConfigError(f"{source}: invalid YAML: {err}") from err
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as err:
        raise ConfigError(f"{source}: {_format_validation(err)}") from err


def build_scenario(experiment: ExperimentConfig) -> Scenario:
    """Explicit instance when requests are listed, otherwise a generated one from ``seed``."""
    params = experiment.generator_params()
    if experiment.requests is None or experiment.channels is None:
        return generate_scenario(experiment.seed, params)
    grid = ViewGrid.from_delta(experiment.V, experiment.Q, experiment.delta)
    return Scenario.build(
        grid,
        requests=experiment.requests,
        channels=experiment.channels,
        R=experiment.R,
        T=experiment.T,
        B=experiment.B,
        E_b=experiment.E_b,
        E_u=experiment.E_u,
        beta=experiment.beta,
        n0=experiment.n0,
    )


def parse_config(path: str | Path) -> RunConfig:
    """Load, validate and materialize an experiment file."""
    experiment = load_experiment(path)
    sweep: SweepSpec | None = None
    if experiment.sweep is not None:
        section = experiment.sweep
        values = section.values or list(DEFAULT_SWEEP_VALUES[section.parameter])
        sweep = SweepSpec(
            parameter=section.parameter,
            values=tuple(values),
            trials=section.trials,
            schemes=tuple(section.schemes),
            base_seed=section.base_seed,
            params=experiment.generator_params(),
        )
    options = SolveOptions(
        rho=experiment.dc.rho, tol=experiment.dc.tol, max_iter=experiment.dc.max_iter
    )
    return RunConfig(
        source=Path(path),
        experiment=experiment,
        scenario=build_scenario(experiment),
        sweep=sweep,
        options=options,
    )
