"""JSON-lines run log of solves and sweep trials."""

from __future__ import annotations

import json
import math
import os
import threading
import time
from hashlib import sha256
from pathlib import Path
from typing import Any, Iterable

from viewcast.model import Scenario

LOG_PATH = Path("data/logs/solves.jsonl")
MAX_LOG_BYTES = 10 * 1024 * 1024

_log_lock = threading.Lock()


def _rotate_log_if_needed(path: Path) -> None:
    if not path.exists():
        return
    if path.stat().st_size <= MAX_LOG_BYTES:
        return
    timestamp = time.strftime("%Y%m%d-%H%M%S", time.gmtime())
    rotated = path.with_name(f"{path.stem}-{timestamp}{path.suffix}")
    path.rename(rotated)


def scenario_hash(scenario: Scenario) -> str:
    return sha256(repr(scenario.fingerprint()).encode("utf-8")).hexdigest()


def log_solve(
    *,
    scheme: str,
    energy_j: float,
    wall_ms: float,
    K: int,
    scenario: Scenario | None = None,
    flags: Iterable[str] = (),
    seed: int | None = None,
    path: Path = LOG_PATH,
) -> None:
    record: dict[str, Any] = {
        "ts_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "scheme": scheme,
        "energy_j": energy_j if math.isfinite(energy_j) else None,
        "wall_ms": round(wall_ms, 2),
        "K": K,
        "flags": sorted(set(flags)),
    }
    if scenario is not None:
        record["scenario_hash"] = scenario_hash(scenario)
    if seed is not None:
        record["seed"] = seed

    with _log_lock:
        path.parent.mkdir(parents=True, exist_ok=True)
        _rotate_log_if_needed(path)
        with path.open("a", encoding="utf-8") as handle:
            handle.write(json.dumps(record, separators=(",", ":")) + os.linesep)
