"""Run orchestration: validated configs, hashed manifests, single runs, sweeps.

A RunConfig pins everything a run depends on.  Its canonical form drops the
master seed and output paths, so the config hash identifies an experiment
while seeds vary across repetitions; the manifest records the full config,
the hash, and the seed, and identical configs reproduce byte-identical
artifacts.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .adversary import GreedyKiller, LoadAttacker, ReplaySource
from .crs import SCHEMES
from .generators import GenSpec
from .metrics import (
    RunMetrics,
    manifest_payload,
    martingale_trace,
    run_summary,
    write_loads_csv,
    write_manifest,
    write_trace_csv,
)
from .pipeline import RunRecord, run_greedy, run_partial, run_pipeline
from .seeding import derive_seed
from .stream import load_instance, validate_instance

ALGOS = ("greedy", "partial", "pipeline")
GENERATOR_SOURCES = ("regular", "binomial", "greedy-hard")
ADAPTIVE_SOURCES = ("load-attacker", "greedy-killer")
SOURCES = ("file",) + GENERATOR_SOURCES + ADAPTIVE_SOURCES

_HASH_EXCLUDED = ("master_seed", "manifest_path", "loads_path")


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


@dataclass(frozen=True)
class RunConfig:
    """Flat, JSON-serializable description of one run."""

    algo: str = "pipeline"
    source: str = "regular"
    instance_path: str | None = None
    n_offline: int | None = None
    delta: int | None = None
    n_online: int | None = None
    edge_prob: float | None = None
    color_frac: float | None = None
    arrivals_budget: int | None = None
    epsilon: float | None = None
    q: float | None = None
    threshold: float | None = None
    crs: str = "exp-clock"
    master_seed: int = 0
    manifest_path: str | None = None
    loads_path: str | None = None
    trace_pairs: int = 0

    def resolved(self) -> "RunConfig":
        """Validate, fill derived defaults, and return the effective config."""
        if self.algo not in ALGOS:
            raise ConfigError(f"unknown algo {self.algo!r}; choose from {ALGOS}")
        if self.source not in SOURCES:
            raise ConfigError(f"unknown source {self.source!r}; choose from {SOURCES}")
        if self.crs not in SCHEMES:
            raise ConfigError(
                f"unknown crs scheme {self.crs!r}; choose from {tuple(SCHEMES)}"
            )
        if self.epsilon is not None and self.epsilon <= 0:
            raise ConfigError("epsilon must be > 0")
        if self.q is not None and not 0 < self.q:
            raise ConfigError("q must be > 0")
        if self.threshold is not None and self.threshold <= 0:
            raise ConfigError("threshold must be > 0")
        if self.trace_pairs < 0:
            raise ConfigError("trace_pairs must be >= 0")

        out = self
        if self.source == "file":
            if not self.instance_path:
                raise ConfigError("source=file requires instance_path")
        else:
            if self.instance_path:
                raise ConfigError(
                    "instance_path is only valid with source=file (one input source)"
                )
            if not self.n_offline or self.n_offline < 1:
                raise ConfigError(f"source={self.source} requires n_offline >= 1")
            if not self.delta or self.delta < 1:
                raise ConfigError(f"source={self.source} requires delta >= 1")
        if self.source == "binomial":
            if not self.n_online or self.n_online < 1:
                raise ConfigError("source=binomial requires n_online >= 1")
            if self.edge_prob is None or not 0 <= self.edge_prob <= 1:
                raise ConfigError("source=binomial requires edge_prob in [0, 1]")
        if self.source == "load-attacker":
            if out.color_frac is None:
                out = replace(out, color_frac=out.epsilon if out.epsilon else 0.1)
            if out.arrivals_budget is None:
                out = replace(out, arrivals_budget=out.n_offline)
            if out.color_frac <= 0:
                raise ConfigError("color_frac must be > 0")
            if out.arrivals_budget < 0:
                raise ConfigError("arrivals_budget must be >= 0")
        return out

    def canonical(self) -> dict:
        d = asdict(self)
        for key in _HASH_EXCLUDED:
            d.pop(key)
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class ExecResult:
    config: RunConfig
    summary: RunMetrics
    manifest: dict
    record: RunRecord
    trace_paths: list[str]


def _build_source(config: RunConfig):
    """Returns (source, n_offline, delta) for the run loop."""
    if config.source == "file":
        instance = load_instance(config.instance_path)
        validate_instance(instance)
        return ReplaySource(instance), instance.header.n_offline, instance.header.delta
    n, delta = config.n_offline, config.delta
    if config.source in GENERATOR_SOURCES:
        spec = GenSpec(
            kind=config.source,
            n_offline=n,
            delta=delta,
            seed=derive_seed(config.master_seed, "gen"),
            n_online=config.n_online,
            edge_prob=config.edge_prob,
        )
        return ReplaySource(spec.build()), n, delta
    if config.source == "load-attacker":
        return LoadAttacker(delta, config.color_frac, config.arrivals_budget), n, delta
    return GreedyKiller(delta, n), n, delta


def execute_run(config: RunConfig, *, on_step=None) -> ExecResult:
    """Run one config end to end and write whatever artifacts it names."""
    config = config.resolved()
    source, n, delta = _build_source(config)
    if config.algo == "greedy":
        record = run_greedy(source, n, delta, on_step=on_step)
    elif config.algo == "partial":
        record = run_partial(
            source,
            n,
            delta,
            epsilon=config.epsilon,
            scheme=config.crs,
            master_seed=config.master_seed,
            on_step=on_step,
        )
    else:
        record = run_pipeline(
            source,
            n,
            delta,
            epsilon=config.epsilon,
            q=config.q,
            threshold=config.threshold,
            scheme=config.crs,
            master_seed=config.master_seed,
            on_step=on_step,
        )
    summary = run_summary(record)
    manifest = manifest_payload(
        summary,
        config=asdict(config),
        config_hash=config.config_hash(),
        seed=config.master_seed,
    )

    trace_paths: list[str] = []
    if config.trace_pairs > 0 and record.transcripts:
        transcript = record.transcripts[0]
        cfg0 = transcript.cfg
        delta_int = int(round(cfg0.delta))
        c_size = max(1, math.ceil(cfg0.epsilon * delta_int))
        c_size = min(c_size, cfg0.palette_size)
        rng = np.random.Generator(
            np.random.PCG64(derive_seed(config.master_seed, "trace"))
        )
        stem = Path(config.manifest_path) if config.manifest_path else None
        traces_meta = []
        for j in range(config.trace_pairs):
            U = sorted(
                int(u)
                for u in rng.choice(n, size=min(delta_int, n), replace=False)
            )
            C = sorted(
                int(c)
                for c in rng.choice(cfg0.palette_size, size=c_size, replace=False)
            )
            trace = martingale_trace(transcript, U, C)
            meta = {
                "U": U,
                "C": C,
                "drift": trace.drift,
                "max_z": trace.max_z,
                "sum_sq_increments": trace.sum_sq_increments,
                "step_bound": trace.step_bound,
                "variance_budget": trace.variance_budget,
            }
            if stem is not None:
                path = stem.with_name(f"{stem.stem}.trace{j}.csv")
                write_trace_csv(trace, path)
                trace_paths.append(str(path))
                meta["path"] = path.name
            traces_meta.append(meta)
        manifest["traces"] = traces_meta

    if config.manifest_path:
        write_manifest(manifest, config.manifest_path)
    if config.loads_path:
        transcript = record.transcripts[0] if record.transcripts else None
        write_loads_csv(transcript, config.loads_path)
    return ExecResult(
        config=config,
        summary=summary,
        manifest=manifest,
        record=record,
        trace_paths=trace_paths,
    )


# ---------------------------------------------------------------------------
# Sweeps


@dataclass
class SweepResult:
    rows: list[dict]
    aggregate_path: str | None
    manifest_paths: list[str]
    failures: list[tuple[str, str]]  # (cell name, error)


def _sweep_cell(args) -> tuple[str, dict | None, str | None]:
    """One sweep cell; returns (name, summary dict, error)."""
    name, config = args
    try:
        result = execute_run(config)
    except Exception as exc:  # recorded, sweep continues
        return name, None, f"{type(exc).__name__}: {exc}"
    s = result.summary
    residual_decay = None
    if s.per_level:
        residual_decay = s.per_level[0]["residual_max_degree"] / s.realized_delta
    return (
        name,
        {
            "delta": config.delta,
            "ratio": s.ratio,
            "colors_used": s.colors_used,
            "colored_fraction": s.colored_fraction,
            "residual_decay": residual_decay,
        },
        None,
    )


def sweep(
    template: RunConfig,
    delta_list,
    seed_count: int,
    *,
    out_dir,
    jobs: int = 1,
    threshold_frac: float | None = None,
) -> SweepResult:
    """Cross product of deltas and seeds; one manifest per cell, one aggregate.

    Cell seeds derive from the template's master seed and the cell name, so
    cells are independent and the whole sweep is reproducible.  A failing
    cell is recorded and the sweep continues.
    """
    if seed_count < 1:
        raise ConfigError("seed_count must be >= 1")
    deltas = [int(d) for d in delta_list]
    if not deltas:
        raise ConfigError("delta_list must be nonempty")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    cells = []
    for d in deltas:
        for s in range(seed_count):
            name = f"d{d}_s{s}"
            overrides = {
                "delta": d,
                "master_seed": derive_seed(template.master_seed, f"sweep:{d}:{s}"),
                "manifest_path": str(out_dir / f"run_{name}.json"),
            }
            if threshold_frac is not None:
                overrides["threshold"] = d * threshold_frac
            cells.append((name, replace(template, **overrides).resolved()))

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_sweep_cell, cells))
    else:
        outcomes = [_sweep_cell(cell) for cell in cells]

    failures = [(name, err) for name, _, err in outcomes if err is not None]
    by_delta: dict[int, list[dict]] = {d: [] for d in deltas}
    for (name, cell_summary, err), (_, config) in zip(outcomes, cells):
        if err is None:
            by_delta[config.delta].append(cell_summary)

    rows = []
    for d in deltas:
        group = by_delta[d]
        if not group:
            continue
        ratios = np.array([g["ratio"] for g in group])
        fractions = np.array([g["colored_fraction"] for g in group])
        decays = [g["residual_decay"] for g in group if g["residual_decay"] is not None]
        row = {
            "delta": d,
            "runs": len(group),
            "ratio_mean": float(ratios.mean()),
            "ratio_std": float(ratios.std(ddof=1)) if len(group) > 1 else 0.0,
            "colors_mean": float(np.mean([g["colors_used"] for g in group])),
            "colored_fraction_mean": float(fractions.mean()),
            "colored_fraction_std": (
                float(fractions.std(ddof=1)) if len(group) > 1 else 0.0
            ),
            "residual_decay_mean": float(np.mean(decays)) if decays else "",
        }
        rows.append(row)

    aggregate_path = out_dir / "aggregate.csv"
    with aggregate_path.open("w", newline="") as fh:
        fieldnames = [
            "delta",
            "runs",
            "ratio_mean",
            "ratio_std",
            "colors_mean",
            "colored_fraction_mean",
            "colored_fraction_std",
            "residual_decay_mean",
        ]
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)

    return SweepResult(
        rows=rows,
        aggregate_path=str(aggregate_path),
        manifest_paths=[str(out_dir / f"run_{name}.json") for name, _ in cells],
        failures=failures,
    )
