"""Run configs, execution artifacts, and delta x seed sweeps."""
import json
import math
from dataclasses import replace
from pathlib import Path

import pytest

from oec.harness import (
    ADAPTIVE_SOURCES,
    ALGOS,
    GENERATOR_SOURCES,
    SOURCES,
    ConfigError,
    RunConfig,
    execute_run,
    sweep,
)
from oec.metrics import martingale_trace, read_loads_csv, read_manifest
from oec.seeding import derive_seed
from oec.stream import save_instance
from oec.generators import gen_random_regular


def test_source_and_algo_registries():
    assert ALGOS == ("greedy", "partial", "pipeline")
    assert set(SOURCES) == {"file"} | set(GENERATOR_SOURCES) | set(ADAPTIVE_SOURCES)


# ---------------------------------------------------------------------------
# Config validation


@pytest.mark.parametrize(
    "overrides",
    [
        {"algo": "magic"},
        {"source": "oracle"},
        {"crs": "coin-flip"},
        {"epsilon": 0.0},
        {"q": 0.0},
        {"threshold": -1.0},
        {"trace_pairs": -1},
        {"source": "file"},  # missing instance_path
        {"source": "regular", "instance_path": "x.jsonl"},  # two input sources
        {"source": "regular", "n_offline": None},
        {"source": "regular", "n_offline": 10, "delta": 0},
        {"source": "binomial"},  # missing n_online / edge_prob
        {"source": "binomial", "n_online": 5, "edge_prob": 1.5},
        {"source": "load-attacker", "color_frac": -0.2},
        {"source": "load-attacker", "arrivals_budget": -3},
    ],
)
def test_resolved_rejects_bad_configs(overrides):
    base = dict(algo="greedy", source="regular", n_offline=10, delta=3)
    base.update(overrides)
    with pytest.raises(ConfigError):
        RunConfig(**base).resolved()


def test_attacker_defaults_follow_epsilon():
    cfg = RunConfig(
        algo="greedy", source="load-attacker", n_offline=6, delta=2
    ).resolved()
    assert cfg.color_frac == 0.1
    assert cfg.arrivals_budget == 6
    cfg = RunConfig(
        algo="greedy", source="load-attacker", n_offline=6, delta=2, epsilon=0.3
    ).resolved()
    assert cfg.color_frac == 0.3


def test_config_hash_ignores_seed_and_paths():
    base = RunConfig(algo="greedy", source="regular", n_offline=10, delta=3)
    assert "master_seed" not in base.canonical()
    assert "manifest_path" not in base.canonical()
    assert "loads_path" not in base.canonical()
    same = replace(
        base, master_seed=99, manifest_path="out.json", loads_path="loads.csv"
    )
    assert base.config_hash() == same.config_hash()
    assert base.config_hash() != replace(base, algo="partial").config_hash()
    assert base.config_hash() != replace(base, delta=4).config_hash()


# ---------------------------------------------------------------------------
# Single runs


def test_execute_greedy_writes_manifest_and_header_only_loads(tmp_path):
    manifest_path = tmp_path / "run.json"
    loads_path = tmp_path / "loads.csv"
    config = RunConfig(
        algo="greedy",
        source="regular",
        n_offline=12,
        delta=3,
        master_seed=4,
        manifest_path=str(manifest_path),
        loads_path=str(loads_path),
    )
    result = execute_run(config)
    assert result.summary.colored == result.summary.m == 36
    manifest = read_manifest(manifest_path)
    assert manifest == result.manifest
    assert manifest["seed"] == 4
    assert manifest["config_hash"] == config.config_hash()
    assert manifest["config"]["n_offline"] == 12
    assert manifest["colors_used"] == result.summary.colors_used
    # Greedy has no level transcript, so the loads file is header-only.
    assert read_loads_csv(loads_path) == []
    assert result.trace_paths == []
    assert "traces" not in manifest


def test_execute_partial_samples_traces(tmp_path):
    manifest_path = tmp_path / "partial.json"
    config = RunConfig(
        algo="partial",
        source="regular",
        n_offline=30,
        delta=4,
        epsilon=0.25,
        master_seed=11,
        manifest_path=str(manifest_path),
        loads_path=str(tmp_path / "loads.csv"),
        trace_pairs=2,
    )
    result = execute_run(config)
    manifest = read_manifest(manifest_path)
    assert len(manifest["traces"]) == 2
    assert result.trace_paths == [
        str(tmp_path / "partial.trace0.csv"),
        str(tmp_path / "partial.trace1.csv"),
    ]
    transcript = result.record.transcripts[0]
    P = transcript.cfg.palette_size
    for j, meta in enumerate(manifest["traces"]):
        assert set(meta) == {
            "U",
            "C",
            "drift",
            "max_z",
            "sum_sq_increments",
            "step_bound",
            "variance_budget",
            "path",
        }
        assert len(meta["U"]) == 4
        assert len(meta["C"]) == math.ceil(0.25 * 4)
        assert all(0 <= c < P for c in meta["C"])
        assert meta["path"] == f"partial.trace{j}.csv"
        assert Path(tmp_path / meta["path"]).exists()
        replayed = martingale_trace(transcript, meta["U"], meta["C"])
        assert replayed.drift == pytest.approx(meta["drift"])
        assert replayed.max_z == pytest.approx(meta["max_z"])
    loads = read_loads_csv(tmp_path / "loads.csv")
    assert len(loads) == result.summary.n_online * P


def test_trace_sampling_depends_on_master_seed(tmp_path):
    def traces(seed):
        config = RunConfig(
            algo="partial",
            source="regular",
            n_offline=30,
            delta=4,
            epsilon=0.25,
            master_seed=seed,
            manifest_path=str(tmp_path / f"m{seed}.json"),
            trace_pairs=1,
        )
        return execute_run(config).manifest["traces"][0]

    assert traces(0) == traces(0)
    a, b = traces(1), traces(2)
    assert (a["U"], a["C"]) != (b["U"], b["C"])


def test_execute_run_reproducible_bytes(tmp_path):
    def run_once(directory):
        directory.mkdir(exist_ok=True)
        config = RunConfig(
            algo="partial",
            source="regular",
            n_offline=24,
            delta=3,
            epsilon=0.3,
            master_seed=8,
            manifest_path=str(directory / "run.json"),
            loads_path=str(directory / "loads.csv"),
        )
        execute_run(config)
        return (
            (directory / "run.json").read_bytes(),
            (directory / "loads.csv").read_bytes(),
        )

    m1, l1 = run_once(tmp_path / "a")
    m2, l2 = run_once(tmp_path / "b")
    # Manifests embed the config paths, which differ across directories.
    assert json.loads(m1)["colors_used"] == json.loads(m2)["colors_used"]
    assert json.loads(m1)["config_hash"] == json.loads(m2)["config_hash"]
    assert l1 == l2


def test_file_source_matches_generator(tmp_path):
    instance = gen_random_regular(15, 3, seed=derive_seed(6, "gen"))
    path = tmp_path / "inst.jsonl"
    save_instance(instance, path)
    via_file = execute_run(
        RunConfig(algo="greedy", source="file", instance_path=str(path))
    )
    via_gen = execute_run(
        RunConfig(algo="greedy", source="regular", n_offline=15, delta=3, master_seed=6)
    )
    assert via_file.summary.colors_used == via_gen.summary.colors_used
    assert via_file.summary.m == via_gen.summary.m == 45


def test_adaptive_sources_run_end_to_end():
    attacker = execute_run(
        RunConfig(
            algo="partial",
            source="load-attacker",
            n_offline=20,
            delta=4,
            epsilon=0.25,
            arrivals_budget=10,
            master_seed=2,
        )
    )
    assert attacker.summary.n_online == 10
    assert attacker.summary.m == 40
    killer = execute_run(
        RunConfig(algo="greedy", source="greedy-killer", n_offline=4, delta=3)
    )
    assert killer.summary.colors_used == 5
    assert killer.summary.n_online == 7


# ---------------------------------------------------------------------------
# Sweeps


def test_sweep_grid_artifacts(tmp_path):
    template = RunConfig(algo="greedy", source="regular", n_offline=12, master_seed=5)
    result = sweep(template, [2, 3], 3, out_dir=tmp_path / "grid")
    assert result.failures == []
    assert len(result.rows) == 2
    for row, d in zip(result.rows, (2, 3)):
        assert row["delta"] == d
        assert row["runs"] == 3
        assert row["ratio_mean"] >= 1.0
        assert row["colored_fraction_mean"] == 1.0
    for d in (2, 3):
        for s in range(3):
            manifest = read_manifest(tmp_path / "grid" / f"run_d{d}_s{s}.json")
            assert manifest["seed"] == derive_seed(5, f"sweep:{d}:{s}")
            assert manifest["config"]["delta"] == d
    agg = (tmp_path / "grid" / "aggregate.csv").read_text().splitlines()
    assert agg[0] == (
        "delta,runs,ratio_mean,ratio_std,colors_mean,"
        "colored_fraction_mean,colored_fraction_std,residual_decay_mean"
    )
    assert len(agg) == 3


def test_sweep_records_failures_and_continues(tmp_path):
    template = RunConfig(algo="greedy", source="greedy-killer", n_offline=2)
    result = sweep(template, [2, 4], 2, out_dir=tmp_path / "bad")
    # delta=4 needs at least 4 offline nodes, so those cells fail.
    assert sorted(name for name, _ in result.failures) == ["d4_s0", "d4_s1"]
    assert [row["delta"] for row in result.rows] == [2]
    assert result.rows[0]["runs"] == 2


def test_sweep_threshold_frac_scales_with_delta(tmp_path):
    template = RunConfig(
        algo="pipeline",
        source="regular",
        n_offline=60,
        epsilon=0.25,
        q=0.6,
        master_seed=1,
    )
    result = sweep(
        template, [4, 8], 1, out_dir=tmp_path / "thr", threshold_frac=0.5
    )
    assert result.failures == []
    for d in (4, 8):
        manifest = read_manifest(tmp_path / "thr" / f"run_d{d}_s0.json")
        assert manifest["config"]["threshold"] == d * 0.5


def test_sweep_parallel_matches_serial(tmp_path):
    template = RunConfig(algo="greedy", source="regular", n_offline=10, master_seed=3)
    serial = sweep(template, [2, 3], 2, out_dir=tmp_path / "serial", jobs=1)
    parallel = sweep(template, [2, 3], 2, out_dir=tmp_path / "parallel", jobs=2)
    assert serial.rows == parallel.rows
    for name in ("run_d2_s0.json", "run_d3_s1.json"):
        a = (tmp_path / "serial" / name).read_bytes()
        b = (tmp_path / "parallel" / name).read_bytes()
        # Bytes differ only through the embedded manifest path.
        assert json.loads(a)["colors_used"] == json.loads(b)["colors_used"]
        assert json.loads(a)["seed"] == json.loads(b)["seed"]


def test_sweep_rejects_bad_grids(tmp_path):
    template = RunConfig(algo="greedy", source="regular", n_offline=10)
    with pytest.raises(ConfigError):
        sweep(template, [2], 0, out_dir=tmp_path)
    with pytest.raises(ConfigError):
        sweep(template, [], 2, out_dir=tmp_path)
