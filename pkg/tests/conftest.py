from __future__ import annotations

import sys
from collections.abc import Callable, Sequence
from pathlib import Path

import pytest

PROJECT_ROOT = Path(__file__).resolve().parents[1]
SRC_PATH = PROJECT_ROOT / "src"

if SRC_PATH.is_dir():
    src_str = str(SRC_PATH)
    if src_str not in sys.path:
        sys.path.insert(0, src_str)

from viewcast.experiments import GeneratorParams, generate_scenario  # noqa: E402
from viewcast.model import Scenario, ViewGrid  # noqa: E402
from viewcast.validation import four_user_scenario  # noqa: E402

ScenarioFactory = Callable[..., Scenario]


@pytest.fixture
def four_users() -> Scenario:
    return four_user_scenario()


@pytest.fixture
def unit_scenario() -> ScenarioFactory:
    """Scenarios on unit physics: n0 = h = T = 1 and R = B = 1, so one view costs 2^(1/t) - 1."""

    def build(
        requests: Sequence[float],
        *,
        V: int = 2,
        Q: int = 2,
        delta: float = 1.0,
        channels: Sequence[float] | None = None,
        E_b: float = 0.5,
        E_u: float | Sequence[float] = 0.5,
        beta: float = 3.0,
    ) -> Scenario:
        return Scenario.build(
            ViewGrid.from_delta(V, Q, delta),
            requests=requests,
            channels=channels if channels is not None else [1.0] * len(requests),
            R=1.0,
            T=1.0,
            B=1.0,
            E_b=E_b,
            E_u=E_u,
            beta=beta,
            n0=1.0,
        )

    return build


@pytest.fixture
def small_scenarios() -> list[Scenario]:
    """Random instances small enough for the unpruned search."""
    return [
        generate_scenario(seed, GeneratorParams(K=1 + seed % 3, V=3, Q=2, delta=1.0))
        for seed in range(12)
    ]
