"""Analysis quantities and artifact export for coloring runs.

Covers per-step color loads with the good/not-good split, (U, C) pair
probes, pick-indexed martingale traces with their deterministic step
bounds, the Freedman tail helper, an independent properness validator,
whole-run summaries, and the CSV/JSON export schemas.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .partial import LevelTranscript, PaletteState, StepOutcome, residual_subgraph
from .pipeline import RunRecord
from .stream import realized_max_degree


class SizeMismatch(ValueError):
    """Probe node or color set has the wrong cardinality."""


class ValidationFailure(Exception):
    """Independent validator found conflicts; carries the diagnostics."""

    def __init__(self, violations: list[str]):
        self.violations = violations
        preview = "; ".join(violations[:3])
        more = "" if len(violations) <= 3 else f" (+{len(violations) - 3} more)"
        super().__init__(f"{len(violations)} coloring violations: {preview}{more}")


# ---------------------------------------------------------------------------
# Per-step loads


@dataclass(frozen=True)
class StepLoadReport:
    """Per-color snapshot loads of one arrival and their good flags."""

    t: int
    loads: np.ndarray
    epsilon: float

    @property
    def good(self) -> np.ndarray:
        return self.loads <= 1.0 + self.epsilon

    @property
    def count_not_good(self) -> int:
        return int((~self.good).sum())


def classify_colors(step: StepOutcome, epsilon: float) -> StepLoadReport:
    """Good/not-good split of the step's snapshot loads S_c = sum_u x[u, c]."""
    return StepLoadReport(t=step.t, loads=step.loads, epsilon=epsilon)


# ---------------------------------------------------------------------------
# Pair probes


@dataclass(frozen=True)
class PairProbe:
    """Mass of one (U, C) pair: value = sum over U, C of x[u, c]."""

    U: tuple[int, ...]
    C: tuple[int, ...]
    value: float
    threshold: float

    @property
    def is_bad(self) -> bool:
        return self.value > self.threshold


def _check_ids(ids, upper: int, label: str) -> tuple[int, ...]:
    out = tuple(int(v) for v in ids)
    if len(set(out)) != len(out):
        raise SizeMismatch(f"duplicate ids in {label}")
    for v in out:
        if not 0 <= v < upper:
            raise SizeMismatch(f"{label} id {v} out of range [0, {upper})")
    return out


def bad_pair_probe(
    state: PaletteState, U, C, epsilon: float | None = None
) -> PairProbe:
    """Probe one (node set, color set) pair against the current palettes.

    Sizes are enforced: |U| must equal the level's degree bound (which must
    be integral) and |C| must equal ceil(epsilon * delta).  The pair is bad
    when its mass exceeds (1 + epsilon) * |C|.
    """
    cfg = state.cfg
    eps = cfg.epsilon if epsilon is None else epsilon
    delta_int = int(round(cfg.delta))
    if abs(cfg.delta - delta_int) > 1e-9:
        raise SizeMismatch(f"probe sizes undefined for fractional delta {cfg.delta}")
    U = _check_ids(U, state.n_offline, "U")
    C = _check_ids(C, cfg.palette_size, "C")
    if len(U) != delta_int:
        raise SizeMismatch(f"|U| must be {delta_int}, got {len(U)}")
    want_c = math.ceil(eps * delta_int)
    if len(C) != want_c:
        raise SizeMismatch(f"|C| must be {want_c}, got {len(C)}")
    value = pair_mass(state, U, C)
    return PairProbe(U=U, C=C, value=value, threshold=(1.0 + eps) * len(C))


def pair_mass(state: PaletteState, U, C) -> float:
    """sum_{u in U} sum_{c in C} x[u, c] with no size policing."""
    U = np.asarray(list(U), dtype=np.int64)
    C = np.asarray(list(C), dtype=np.int64)
    if U.size == 0 or C.size == 0:
        return 0.0
    counts = state.avail[np.ix_(U, C)].sum(axis=1)
    sizes = state.size[U]
    weights = np.where(sizes > 0, 1.0 / np.maximum(sizes, 1), 0.0)
    return float(counts @ weights)


# ---------------------------------------------------------------------------
# Martingale traces


@dataclass
class MartingaleTrace:
    """Z series of one traced (U, C) pair, indexed by the global pick count.

    z[i] is the pair's availability mass after i picks (skipped edges do
    not advance the counter); touched[i-1] says whether pick i happened at
    a node of U.  The step bound 2 / (sqrt(eps) * delta) and the start
    value |U| * |C| / palette_size are asserted at construction on inputs
    respecting the level's degree bound.
    """

    U: tuple[int, ...]
    C: tuple[int, ...]
    z: np.ndarray
    touched: np.ndarray
    step_bound: float
    variance_budget: float

    @property
    def drift(self) -> float:
        return float(self.z[-1] - self.z[0])

    @property
    def max_z(self) -> float:
        return float(self.z.max())

    @property
    def sum_sq_increments(self) -> float:
        return float(((self.z[1:] - self.z[:-1]) ** 2).sum())


def martingale_trace(transcript: LevelTranscript, U, C) -> MartingaleTrace:
    """Replay the transcript's picks and track one pair's mass.

    Palettes are a deterministic function of the pick sequence, so the
    replayed series equals what incremental tracking during the run would
    have produced.  U and C may be any nonempty duplicate-free sets; the
    degree-bound sizing of probes is not required here.
    """
    cfg = transcript.cfg
    P = cfg.palette_size
    U = _check_ids(U, transcript.n_offline, "U")
    C = _check_ids(C, P, "C")
    if not U or not C:
        raise SizeMismatch("U and C must be nonempty")
    u_set = set(U)
    c_set = set(C)

    track = {u: (P, len(C)) for u in U}  # palette size, |C| overlap
    z0 = len(U) * len(C) / P
    bound = 2.0 / (math.sqrt(cfg.epsilon) * cfg.delta)
    zs = [z0]
    touched: list[bool] = []
    cur = z0
    for _, u, c in transcript.pick_events():
        if u in u_set:
            s, a = track[u]
            s2 = s - 1
            a2 = a - 1 if c in c_set else a
            after = a2 / s2 if s2 > 0 else 0.0
            dz = after - a / s
            if abs(dz) > bound + 1e-12:
                raise AssertionError(
                    f"step bound violated: |dZ| = {abs(dz):.6g} > {bound:.6g} "
                    "(input exceeds the level's degree bound?)"
                )
            cur += dz
            track[u] = (s2, a2)
            touched.append(True)
        else:
            touched.append(False)
        zs.append(cur)
    return MartingaleTrace(
        U=U,
        C=C,
        z=np.array(zs),
        touched=np.array(touched, dtype=bool),
        step_bound=bound,
        variance_budget=2.0 / cfg.epsilon,
    )


def freedman_bound(sigma2: float, step_a: float, lam: float) -> float:
    """Martingale tail bound exp(-lam^2 / (2 * (sigma2 + step_a * lam / 3))).

    Valid for martingales with increments bounded by step_a and predictable
    variance at most sigma2; lam is the deviation from the start value.
    """
    if sigma2 < 0 or step_a < 0 or lam < 0:
        raise ValueError("all arguments must be >= 0")
    if lam == 0:
        return 1.0
    denom = 2.0 * (sigma2 + step_a * lam / 3.0)
    if denom <= 0:
        raise ValueError("sigma2 + step_a * lam must be > 0")
    return math.exp(-(lam**2) / denom)


def expected_occupied_fraction(load: float) -> float:
    """Limit fraction of occupied bins after load * m balls into m bins.

    Equals (1 - exp(-load)) / load, the large-m limit of the occupancy
    expectation; continuously extended to 1 at load = 0.
    """
    if load < 0:
        raise ValueError("load must be >= 0")
    if load == 0:
        return 1.0
    return (1.0 - math.exp(-load)) / load


# ---------------------------------------------------------------------------
# Whole-run validation and summary


def coloring_violations(
    arrivals, assignment, n_offline: int, *, require_total: bool = False
) -> list[str]:
    """Independent properness check, recomputed from raw edges and colors.

    Returns diagnostics (empty = proper): duplicate colors at an online
    node, duplicate colors at an offline node, row shape mismatches, and,
    when ``require_total``, any uncolored edge.
    """
    violations: list[str] = []
    offline_seen: list[set[int]] = [set() for _ in range(n_offline)]
    for t, (arrival, row) in enumerate(zip(arrivals, assignment)):
        if len(row) != len(arrival.neighbors):
            violations.append(f"arrival {t}: {len(row)} colors for {len(arrival.neighbors)} edges")
            continue
        online_seen: set[int] = set()
        for u, c in zip(arrival.neighbors, row):
            if c is None:
                if require_total:
                    violations.append(f"arrival {t}: edge to {u} uncolored")
                continue
            if c in online_seen:
                violations.append(f"arrival {t}: color {c} repeated at the online node")
            online_seen.add(c)
            if c in offline_seen[u]:
                violations.append(f"arrival {t}: color {c} repeated at offline node {u}")
            offline_seen[u].add(c)
    if len(assignment) != len(arrivals):
        violations.append(
            f"{len(assignment)} assignment rows for {len(arrivals)} arrivals"
        )
    return violations


@dataclass
class RunMetrics:
    """JSON-friendly summary of one run."""

    algo: str
    n_offline: int
    n_online: int
    m: int
    declared_delta: int
    realized_delta: int
    colors_used: int
    colored: int
    colored_fraction: float
    ratio: float
    skips: int
    per_level: list[dict]
    tail: dict | None
    occupied_per_arrival: list[int]


def run_summary(record: RunRecord) -> RunMetrics:
    """Validate the run and aggregate its headline numbers.

    Properness is rechecked from scratch here (and totality for the
    algorithms that promise it); a conflict raises ValidationFailure with
    the diagnostics.  The ratio is colors_used / realized max degree, the
    realized degree being the offline optimum for bipartite edge coloring.
    """
    require_total = record.algo != "partial"
    violations = coloring_violations(
        record.arrivals,
        record.assignment,
        record.header.n_offline,
        require_total=require_total,
    )
    if violations:
        raise ValidationFailure(violations)

    per_level: list[dict] = []
    for transcript in record.transcripts:
        cfg = transcript.cfg
        residual = residual_subgraph(transcript)
        per_level.append(
            {
                "delta_i": cfg.delta,
                "epsilon_i": cfg.epsilon,
                "palette": cfg.palette_size,
                "colored": sum(len(s.winners) for s in transcript.steps),
                "residual_max_degree": realized_max_degree(residual),
            }
        )
    tail = None
    if record.tail_base is not None:
        tail = {
            "base": record.tail_base,
            "colored": record.tail_colored,
            "colors": record.tail_colors,
        }
    m = record.m
    colored = record.colored_count
    realized = record.realized_delta
    return RunMetrics(
        algo=record.algo,
        n_offline=record.header.n_offline,
        n_online=record.n_online,
        m=m,
        declared_delta=record.header.delta,
        realized_delta=realized,
        colors_used=record.colors_used,
        colored=colored,
        colored_fraction=(colored / m) if m else 0.0,
        ratio=(record.colors_used / realized) if realized else 0.0,
        skips=record.skips,
        per_level=per_level,
        tail=tail,
        occupied_per_arrival=[
            sum(1 for c in row if c is not None) for row in record.assignment
        ],
    )


# ---------------------------------------------------------------------------
# Export


def replay_loads(transcript: LevelTranscript):
    """Yield (t, loads) per step by replaying palettes from the transcript."""
    P = transcript.cfg.palette_size
    avail = np.ones((transcript.n_offline, P), dtype=bool)
    size = np.full(transcript.n_offline, P, dtype=np.int64)
    for step in transcript.steps:
        nb = np.asarray(step.neighbors, dtype=np.int64)
        loads = np.zeros(P)
        act = nb[[p for p, c in enumerate(step.picks) if c >= 0]]
        if act.size:
            loads = (1.0 / size[act]) @ avail[act]
        yield step.t, loads
        for u, c in zip(step.neighbors, step.picks):
            if c >= 0:
                avail[u, c] = False
                size[u] -= 1


def write_loads_csv(transcript: LevelTranscript | None, path) -> None:
    """Per-arrival per-color loads with good flags; header-only if no level."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "color", "load", "good"])
        if transcript is None:
            return
        eps = transcript.cfg.epsilon
        for t, loads in replay_loads(transcript):
            for c, s in enumerate(loads):
                w.writerow([t, c, f"{s:.12g}", int(s <= 1.0 + eps)])


def read_loads_csv(path) -> list[tuple[int, int, float, int]]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [
        (int(r["t"]), int(r["color"]), float(r["load"]), int(r["good"]))
        for r in rows
    ]


def write_trace_csv(trace: MartingaleTrace, path) -> None:
    """Z series, one row per pick plus the i = 0 start row."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "Z", "touched"])
        w.writerow([0, f"{trace.z[0]:.12g}", 0])
        for i, (z, touch) in enumerate(zip(trace.z[1:], trace.touched), start=1):
            w.writerow([i, f"{z:.12g}", int(touch)])


def manifest_payload(
    summary: RunMetrics, *, config: dict, config_hash: str, seed: int
) -> dict:
    """Assemble the run manifest; key set is the export contract."""
    return {
        "config": config,
        "config_hash": config_hash,
        "seed": seed,
        "algo": summary.algo,
        "n_offline": summary.n_offline,
        "n_online": summary.n_online,
        "m": summary.m,
        "colors_used": summary.colors_used,
        "realized_delta": summary.realized_delta,
        "ratio": summary.ratio,
        "colored": summary.colored,
        "colored_fraction": summary.colored_fraction,
        "skips": summary.skips,
        "per_level": summary.per_level,
        "tail": summary.tail,
    }


def write_manifest(payload: dict, path) -> None:
    """Canonical JSON: sorted keys, fixed separators, trailing newline."""
    text = json.dumps(payload, sort_keys=True, indent=2)
    Path(path).write_text(text + "\n")


def read_manifest(path) -> dict:
    return json.loads(Path(path).read_text())
