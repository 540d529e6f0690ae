"""Cascade of partial-coloring levels with a first-fit tail, plus baselines.

The full algorithm provisions levels with geometrically shrinking degree
bounds delta_0 = delta, delta_{i+1} = q * delta_i.  Each arrival's edges run
through the levels in order; edges a level leaves uncolored cascade to the
next, and whatever survives every level is colored greedily from a fresh
color range.  Levels own pairwise disjoint color ranges, so properness of
the whole coloring reduces to properness within each stage.

Everything here is strictly online: an arrival is fully processed (all
levels plus tail) before the next arrival is requested from the source,
which is what lets adaptive adversaries react to the complete transcript.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .partial import (
    LevelConfig,
    LevelTranscript,
    PaletteState,
    epsilon_default,
    init_level,
    process_arrival,
)
from .seeding import derive_seed
from .stream import (
    DegreeLedger,
    Instance,
    InstanceHeader,
    OnlineArrival,
    realized_max_degree,
    validate_arrival,
)

ALPHA = 10.0 / 11.0
"""Exponent balancing level count against stop degree in the default plan."""


class InfeasibleParameters(Exception):
    """The planned shrink factor is >= 1, so the cascade would not contract.

    Carries the lambda slack that produced the factor (None when q was given
    directly).  Callers may retry with an epsilon or q override.
    """

    def __init__(self, q: float, lam: float | None = None):
        self.q = q
        self.lam = lam
        detail = f"shrink factor q = {q:.6g} >= 1"
        if lam is not None:
            detail += f" (lambda = {lam:.6g})"
        super().__init__(detail + "; override q or epsilon to proceed")


def shrink_slack(n: int | float, delta: int | float) -> float:
    """Default slack lambda = 3*sqrt(2) * (ln(n)/delta)^(1/11).

    Below 1 - 1/e only once delta exceeds ln(n) by many orders of magnitude;
    at desk scale the default is usually infeasible and q is set via an
    epsilon or q override instead.
    """
    return 3.0 * math.sqrt(2.0) * (math.log(n) / delta) ** (ALPHA / 10.0)


def stop_threshold_default(n: int | float, delta: int | float) -> float:
    """Degree floor delta^alpha * (ln n)^(1-alpha) below which levels stop."""
    return delta**ALPHA * math.log(n) ** (1.0 - ALPHA)


@dataclass(frozen=True)
class LevelPlan:
    """Resolved cascade: level configs with disjoint color ranges.

    ``greedy_base`` is the first color index of the tail, equal to the total
    palette size of all levels.  ``lam`` records the slack behind q when q
    was derived rather than overridden.
    """

    levels: tuple[LevelConfig, ...]
    greedy_base: int
    q: float
    threshold: float
    lam: float | None = None

    @property
    def deltas(self) -> tuple[float, ...]:
        return tuple(cfg.delta for cfg in self.levels)

    @property
    def n_levels(self) -> int:
        return len(self.levels)


def plan_levels(
    n: int | float,
    delta: int | float,
    *,
    epsilon: float | None = None,
    q: float | None = None,
    threshold: float | None = None,
) -> LevelPlan:
    """Plan the cascade for degree bound ``delta`` at instance scale ``n``.

    Defaults: q = 1/e + shrink_slack(n, delta), per-level epsilon from
    epsilon_default, stop threshold from stop_threshold_default.  Overrides
    replace each piece independently; an epsilon override also fixes the
    slack to 3*sqrt(epsilon) (its upper-bound role in the default), which
    keeps q consistent with the level guarantees and restores feasibility
    at small scale.  Degree bounds stay real-valued; only palette sizes are
    rounded, inside LevelConfig.

    Raises InfeasibleParameters when the resulting q is >= 1 and ValueError
    for out-of-domain arguments.
    """
    if n < 3:
        raise ValueError(f"n must be >= 3, got {n}")
    if delta < 1:
        raise ValueError(f"delta must be >= 1, got {delta}")
    if epsilon is not None and epsilon <= 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")

    lam: float | None = None
    if q is None:
        lam = 3.0 * math.sqrt(epsilon) if epsilon is not None else shrink_slack(n, delta)
        q = math.exp(-1.0) + lam
    if q >= 1.0:
        raise InfeasibleParameters(q, lam)
    if q <= 0.0:
        raise ValueError(f"q must be in (0, 1), got {q}")

    if threshold is None:
        threshold = stop_threshold_default(n, delta)
    if threshold <= 0.0:
        raise ValueError(f"threshold must be > 0, got {threshold}")

    levels: list[LevelConfig] = []
    base = 0
    d = float(delta)
    # Configs need delta >= 1, so the effective stop never drops below 1.
    stop = max(threshold, 1.0)
    while d >= stop:
        eps_i = epsilon if epsilon is not None else epsilon_default(n, d)
        cfg = LevelConfig(delta=d, epsilon=eps_i, color_base=base)
        levels.append(cfg)
        base += cfg.palette_size
        d *= q
    return LevelPlan(
        levels=tuple(levels), greedy_base=base, q=q, threshold=threshold, lam=lam
    )


class FirstFit:
    """Online first-fit edge coloring from a color base.

    Each edge of an arrival, in neighbor order, takes the lowest color at or
    above ``color_base`` unused at both endpoints.  Colors assigned from a
    base form a contiguous range: a color is only skipped when blocked, and
    blocked means already assigned nearby.
    """

    def __init__(self, n_offline: int, color_base: int = 0):
        self.color_base = color_base
        self.offline_used: list[set[int]] = [set() for _ in range(n_offline)]
        self.top_color = color_base - 1
        self.colored = 0

    def color_arrival(self, neighbors: tuple[int, ...]) -> tuple[int, ...]:
        online_used: set[int] = set()
        out = []
        for u in neighbors:
            used_u = self.offline_used[u]
            c = self.color_base
            while c in used_u or c in online_used:
                c += 1
            used_u.add(c)
            online_used.add(c)
            out.append(c)
            if c > self.top_color:
                self.top_color = c
        self.colored += len(out)
        return tuple(out)

    @property
    def colors_used(self) -> int:
        return self.top_color - self.color_base + 1


def greedy_color(instance: Instance, color_base: int = 0) -> list[tuple[int, ...]]:
    """First-fit the whole instance; returns per-arrival color tuples."""
    ff = FirstFit(instance.header.n_offline, color_base)
    return [ff.color_arrival(a.neighbors) for a in instance.arrivals]


@dataclass
class RunView:
    """Read window an adversary gets between arrivals.

    Exposes the complete transcript: declared bounds, degree ledger, every
    arrival, every assignment, live level palettes, and per-level pick
    records.  Adversaries must treat it as read-only.
    """

    header: InstanceHeader
    ledger: DegreeLedger
    arrivals: list[OnlineArrival]
    assignment: list[tuple[int | None, ...]]
    plan: LevelPlan | None
    level_states: tuple[PaletteState, ...]
    transcripts: tuple[LevelTranscript, ...]

    @property
    def t(self) -> int:
        return len(self.arrivals)

    def remaining_budget(self) -> np.ndarray:
        return self.ledger.remaining(self.header.delta)

    def top_palettes(self) -> PaletteState | None:
        """Palettes of the first level, the natural attack surface."""
        return self.level_states[0] if self.level_states else None


@dataclass
class RunRecord:
    """Complete outcome of one online run, any algorithm."""

    algo: str
    header: InstanceHeader
    arrivals: list[OnlineArrival]
    assignment: list[tuple[int | None, ...]]
    plan: LevelPlan | None = None
    transcripts: list[LevelTranscript] = field(default_factory=list)
    tail_base: int | None = None
    tail_colored: int = 0
    tail_colors: int = 0
    skips: int = 0

    @property
    def m(self) -> int:
        return sum(len(a.neighbors) for a in self.arrivals)

    @property
    def n_online(self) -> int:
        return len(self.arrivals)

    @property
    def colored_count(self) -> int:
        return sum(1 for row in self.assignment for c in row if c is not None)

    @property
    def colors_used(self) -> int:
        return len({c for row in self.assignment for c in row if c is not None})

    @property
    def realized_delta(self) -> int:
        return max(1, realized_max_degree(Instance(self.header, self.arrivals)))

    def level_colored_counts(self) -> list[int]:
        return [
            sum(len(step.winners) for step in tr.steps) for tr in self.transcripts
        ]

    def as_instance(self) -> Instance:
        return Instance(self.header, list(self.arrivals))


def _drive(source, view: RunView, step) -> None:
    """Pull arrivals until the source stops; validate, then apply ``step``.

    The ledger update happens inside validation, so budget accounting and
    structural checks cannot drift apart.
    """
    t = 0
    while True:
        arrival = source.next_arrival(view)
        if arrival is None:
            return
        validate_arrival(view.header, view.ledger, arrival)
        step(t, arrival)
        t += 1


def run_greedy(
    source,
    n_offline: int,
    delta: int,
    *,
    color_base: int = 0,
    on_step=None,
) -> RunRecord:
    """Pure first-fit baseline against any arrival source."""
    header = InstanceHeader(n_offline=n_offline, delta=delta)
    arrivals: list[OnlineArrival] = []
    assignment: list[tuple[int | None, ...]] = []
    view = RunView(
        header=header,
        ledger=DegreeLedger.fresh(n_offline),
        arrivals=arrivals,
        assignment=assignment,
        plan=None,
        level_states=(),
        transcripts=(),
    )
    ff = FirstFit(n_offline, color_base)

    def step(t: int, arrival: OnlineArrival) -> None:
        arrivals.append(arrival)
        assignment.append(ff.color_arrival(arrival.neighbors))
        if on_step is not None:
            on_step(t, view)

    _drive(source, view, step)
    return RunRecord(
        algo="greedy",
        header=header,
        arrivals=arrivals,
        assignment=assignment,
        tail_base=color_base,
        tail_colored=ff.colored,
        tail_colors=ff.colors_used,
    )


def run_partial(
    source,
    n_offline: int,
    delta: int,
    *,
    epsilon: float | None = None,
    scheme=None,
    master_seed: int = 0,
    on_step=None,
) -> RunRecord:
    """Single palette level, no tail: edges may stay uncolored."""
    from .crs import get_scheme

    if scheme is None or isinstance(scheme, str):
        scheme = get_scheme(scheme or "exp-clock")
    eps = epsilon if epsilon is not None else epsilon_default(n_offline, delta)
    cfg = LevelConfig(delta=float(delta), epsilon=eps, color_base=0)
    header = InstanceHeader(n_offline=n_offline, delta=delta)
    state = init_level(n_offline, cfg)
    transcript = LevelTranscript(cfg=cfg, n_offline=n_offline)
    rng = np.random.Generator(np.random.PCG64(derive_seed(master_seed, "level:0")))

    arrivals: list[OnlineArrival] = []
    assignment: list[tuple[int | None, ...]] = []
    view = RunView(
        header=header,
        ledger=DegreeLedger.fresh(n_offline),
        arrivals=arrivals,
        assignment=assignment,
        plan=None,
        level_states=(state,),
        transcripts=(transcript,),
    )
    skips = 0

    def step(t: int, arrival: OnlineArrival) -> None:
        nonlocal skips
        arrivals.append(arrival)
        out = process_arrival(state, arrival, scheme, rng, t=t)
        transcript.append(out)
        skips += len(out.skipped)
        row: list[int | None] = [None] * len(arrival.neighbors)
        for c, pos in out.winners.items():
            row[pos] = cfg.color_base + c
        assignment.append(tuple(row))
        if on_step is not None:
            on_step(t, view)

    _drive(source, view, step)
    return RunRecord(
        algo="partial",
        header=header,
        arrivals=arrivals,
        assignment=assignment,
        plan=None,
        transcripts=[transcript],
        skips=skips,
    )


def run_pipeline(
    source,
    n_offline: int,
    delta: int,
    *,
    plan: LevelPlan | None = None,
    epsilon: float | None = None,
    q: float | None = None,
    threshold: float | None = None,
    scheme=None,
    master_seed: int = 0,
    on_step=None,
) -> RunRecord:
    """Full cascade plus greedy tail; every edge ends up colored.

    Each level draws randomness from its own child stream derived from the
    master seed, so level i's draws do not depend on how many edges earlier
    levels happened to color.
    """
    from .crs import get_scheme

    if scheme is None or isinstance(scheme, str):
        scheme = get_scheme(scheme or "exp-clock")
    if plan is None:
        plan = plan_levels(
            n_offline, delta, epsilon=epsilon, q=q, threshold=threshold
        )
    header = InstanceHeader(n_offline=n_offline, delta=delta)
    states = tuple(init_level(n_offline, cfg) for cfg in plan.levels)
    transcripts = tuple(
        LevelTranscript(cfg=cfg, n_offline=n_offline) for cfg in plan.levels
    )
    rngs = [
        np.random.Generator(np.random.PCG64(derive_seed(master_seed, f"level:{i}")))
        for i in range(plan.n_levels)
    ]
    ff = FirstFit(n_offline, plan.greedy_base)

    arrivals: list[OnlineArrival] = []
    assignment: list[tuple[int | None, ...]] = []
    view = RunView(
        header=header,
        ledger=DegreeLedger.fresh(n_offline),
        arrivals=arrivals,
        assignment=assignment,
        plan=plan,
        level_states=states,
        transcripts=transcripts,
    )
    skips = 0
    tail_off_deg = np.zeros(n_offline, dtype=np.int64)
    tail_max_arrival = 0

    def step(t: int, arrival: OnlineArrival) -> None:
        nonlocal skips, tail_max_arrival
        arrivals.append(arrival)
        row: list[int | None] = [None] * len(arrival.neighbors)
        idx = list(range(len(arrival.neighbors)))
        rest = arrival.neighbors
        for cfg, state, transcript, rng in zip(plan.levels, states, transcripts, rngs):
            if not rest:
                break
            out = process_arrival(state, OnlineArrival(rest), scheme, rng, t=t)
            transcript.append(out)
            skips += len(out.skipped)
            won = set()
            for c, pos in out.winners.items():
                row[idx[pos]] = cfg.color_base + c
                won.add(pos)
            idx = [idx[p] for p in range(len(rest)) if p not in won]
            rest = tuple(rest[p] for p in range(len(rest)) if p not in won)
        if rest:
            tail_max_arrival = max(tail_max_arrival, len(rest))
            for u in rest:
                tail_off_deg[u] += 1
            for pos, c in zip(idx, ff.color_arrival(rest)):
                row[pos] = c
        arrivals_row = tuple(row)
        assert all(c is not None for c in arrivals_row)
        assignment.append(arrivals_row)
        if on_step is not None:
            on_step(t, view)

    _drive(source, view, step)

    record = RunRecord(
        algo="pipeline",
        header=header,
        arrivals=arrivals,
        assignment=assignment,
        plan=plan,
        transcripts=list(transcripts),
        tail_base=plan.greedy_base,
        tail_colored=ff.colored,
        tail_colors=ff.colors_used,
        skips=skips,
    )
    tail_delta = max(
        int(tail_off_deg.max()) if n_offline else 0, tail_max_arrival
    )
    budget = plan.greedy_base + max(0, 2 * tail_delta - 1)
    if record.colors_used > budget:
        raise AssertionError(
            f"color budget violated: used {record.colors_used} > "
            f"{plan.greedy_base} + (2*{tail_delta} - 1)"
        )
    return record
