from __future__ import annotations

import json
import logging
import math

import numpy as np
import pandas as pd
import pytest

from viewcast import experiments
from viewcast.experiments import (
    COLUMNS,
    GeneratorParams,
    SweepSpec,
    TrialRecord,
    deterministic_digest,
    generate_scenario,
    resolve_scheme,
    run_scheme,
    run_sweep,
    run_trial,
    sample_channels,
    summarize,
    write_results,
)
from viewcast.solution import FLAG_FAILED

SMALL = GeneratorParams(K=3, V=3, Q=2)


def _record(value: float, *, scheme: str = "relax", flags: str = "", seed: int = 0):
    return TrialRecord(
        seed=seed,
        K=10,
        B_hz=10e6,
        T_s=0.1,
        scheme=scheme,
        E_total_J=value,
        E_tx_J=value,
        E_synth_server_J=0.0,
        E_synth_users_J=0.0,
        n_views_tx=3,
        solve_ms=1.0,
        flags=flags,
    )


def test_same_seed_gives_the_same_scenario():
    a = generate_scenario(11, GeneratorParams())
    b = generate_scenario(11, GeneratorParams())
    assert a.fingerprint() == b.fingerprint()
    assert generate_scenario(12, GeneratorParams()).fingerprint() != a.fingerprint()


def test_generated_scenarios_respect_the_parameters():
    params = GeneratorParams(K=7, V=4, Q=5, B=20e6, T=0.05)
    scenario = generate_scenario(3, params)
    assert scenario.K == 7
    assert all(scenario.grid.contains(r) for r in scenario.requests)
    assert scenario.B == 20e6 and scenario.T == 0.05
    assert scenario.n0 == pytest.approx(20e6 * 1.38e-23 * 300.0)


def test_channel_draws_have_the_configured_mean():
    draws = sample_channels(np.random.default_rng(0), 100_000, 1e-3)
    assert draws.min() > 0
    assert draws.mean() == pytest.approx(1e-3, rel=0.02)


def test_with_value_casts_user_counts():
    params = GeneratorParams().with_value("K", 4.0)
    assert params.K == 4 and isinstance(params.K, int)
    assert GeneratorParams().with_value("B", 5e6).B == 5e6
    with pytest.raises(ValueError):
        GeneratorParams().with_value("V", 3)


def test_scheme_names_resolve_with_aliases():
    assert resolve_scheme("relax_round") == "relax"
    assert resolve_scheme("dc") == "dc"
    with pytest.raises(ValueError):
        resolve_scheme("greedy")


def test_run_scheme_dispatches_by_name(four_users):
    assert run_scheme("baseline1", four_users).diagnostics.solver == "baseline1"


@pytest.mark.parametrize(
    "kwargs",
    [
        {"parameter": "V", "values": (1.0,), "trials": 1, "schemes": ("relax",)},
        {"parameter": "B", "values": (), "trials": 1, "schemes": ("relax",)},
        {"parameter": "B", "values": (1.0,), "trials": 0, "schemes": ("relax",)},
        {"parameter": "B", "values": (1.0,), "trials": 1, "schemes": ()},
        {"parameter": "B", "values": (1.0,), "trials": 1, "schemes": ("nope",)},
    ],
)
def test_invalid_sweeps_are_rejected(kwargs):
    with pytest.raises(ValueError):
        SweepSpec(**kwargs)


def test_single_cell_sweep_yields_one_record():
    spec = SweepSpec(parameter="B", values=(10e6,), trials=1, schemes=("baseline1",))
    records = run_sweep(spec)
    assert len(records) == 1
    assert records[0].scheme == "baseline1" and records[0].B_hz == 10e6
    assert not records[0].failed


def test_sweep_records_are_ordered_and_seeded():
    spec = SweepSpec(
        parameter="T",
        values=(0.05, 0.1),
        trials=2,
        schemes=("baseline1", "baseline2"),
        base_seed=40,
        params=SMALL,
    )
    seen = []
    records = run_sweep(spec, on_record=seen.append)
    assert seen == records
    assert [(r.T_s, r.seed, r.scheme) for r in records] == [
        (0.05, 40, "baseline1"),
        (0.05, 40, "baseline2"),
        (0.05, 41, "baseline1"),
        (0.05, 41, "baseline2"),
        (0.1, 40, "baseline1"),
        (0.1, 40, "baseline2"),
        (0.1, 41, "baseline1"),
        (0.1, 41, "baseline2"),
    ]


def test_parallel_sweep_is_deterministic():
    spec = SweepSpec(
        parameter="K", values=(2, 3), trials=3, schemes=("exact", "baseline2"), params=SMALL
    )
    serial = run_sweep(spec)
    parallel = run_sweep(spec, workers=3)
    assert deterministic_digest(serial) == deterministic_digest(parallel)
    assert [r.K for r in serial] == [2] * 6 + [3] * 6


def test_failing_scheme_is_recorded_not_raised(monkeypatch, caplog):
    def broken(scenario, options):
        raise RuntimeError("solver exploded")

    monkeypatch.setitem(experiments.SCHEMES, "dc", broken)
    with caplog.at_level(logging.WARNING):
        records = run_trial(5, SMALL, ["dc", "baseline1"], experiments.SolveOptions())
    failed, ok = records
    assert failed.failed and failed.flags == FLAG_FAILED
    assert math.isnan(failed.E_total_J)
    assert not ok.failed
    assert "solver exploded" in caplog.text


def test_summarize_single_record():
    summary = summarize([_record(2.5)])
    row = summary.iloc[0]
    assert row["mean"] == 2.5 and row["stderr"] == 0.0 and row["count"] == 1


def test_summarize_averages_successes_only():
    records = [
        _record(1.0, seed=0),
        _record(3.0, seed=1),
        _record(math.nan, seed=2, flags=FLAG_FAILED),
    ]
    row = summarize(records).iloc[0]
    assert row["mean"] == pytest.approx(2.0)
    assert row["count"] == 2
    assert row["excluded"] == 1
    assert row["stderr"] == pytest.approx(1.0)


def test_all_failed_cells_have_no_aggregate(caplog):
    records = [_record(1.0), _record(math.nan, scheme="dc", flags=FLAG_FAILED)]
    with caplog.at_level(logging.WARNING):
        summary = summarize(records)
    assert summary["scheme"].tolist() == ["relax"]
    assert "every record failed" in caplog.text


def test_summarize_needs_records():
    with pytest.raises(ValueError):
        summarize([])


def test_results_csv_and_manifest(tmp_path):
    spec = SweepSpec(
        parameter="B", values=(5e6, 10e6), trials=2, schemes=("baseline1",), params=SMALL
    )
    records = run_sweep(spec)
    out = tmp_path / "out" / "results.csv"
    manifest_path = write_results(records, out, spec)

    frame = pd.read_csv(out)
    assert list(frame.columns) == COLUMNS
    assert len(frame) == 4
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    assert manifest["rows"] == 4
    assert manifest["file"] == "results.csv"
    assert manifest["bytes"] == out.stat().st_size
    assert manifest["sweep"]["parameter"] == "B"
    assert manifest["sweep"]["schemes"] == ["baseline1"]


def test_bandwidth_lowers_the_energy_of_a_fixed_selection():
    low = generate_scenario(9, GeneratorParams(B=5e6))
    high = generate_scenario(9, GeneratorParams(B=20e6))
    assert run_scheme("baseline1", high).energy.total < run_scheme("baseline1", low).energy.total
