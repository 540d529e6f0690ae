"""Palette-based randomized partial edge coloring, one level.

Every offline node starts with the same palette of
``ceil((1 + sqrt(eps)) * delta)`` colors.  When an online node arrives, the
availability weights

    x[u, c] = 1[c in P(u)] / |P(u)|

are snapshotted for its neighbors before anything changes.  Each incident
edge then picks one color uniformly at random from its offline node's
current palette and the pick is removed from that palette whether or not the
edge ends up colored.  Picks at distinct offline nodes commute, so the order
of edges within an arrival does not matter.  Finally every color picked by
at least one edge is awarded to exactly one of its pickers by a contention
resolution scheme; losing edges stay uncolored at this level.

The palette slack keeps per-color load sums below 1 + eps for most colors,
which is what makes the one-winner resolution nearly fair edge by edge.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .stream import Instance, InstanceHeader, OnlineArrival

logger = logging.getLogger(__name__)


def epsilon_default(n: int | float, delta: int | float) -> float:
    """Default slack parameter 2 * (ln(n) / delta)^(1/5).

    Decreasing in delta; equals 1 exactly at delta = 32 ln(n).  Values above
    1 simply mean the palette more than doubles, which is the regime of very
    small degree bounds.
    """
    if delta < 1:
        raise ValueError("delta must be >= 1")
    log_n = math.log(n)
    if log_n <= 0:
        raise ValueError("n must be > 1")
    return 2.0 * (log_n / delta) ** 0.2


@dataclass(frozen=True)
class LevelConfig:
    """Parameters of one coloring level.

    ``delta`` is the degree bound the level is provisioned for and may be
    fractional for planned cascade levels; realized degrees are integers at
    most floor(delta) on conforming inputs.  Colors are level local,
    0..palette_size-1; ``color_base`` shifts them into a globally disjoint
    range.
    """

    delta: float
    epsilon: float
    color_base: int = 0

    def __post_init__(self):
        if self.delta < 1:
            raise ValueError(f"delta must be >= 1, got {self.delta}")
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if self.color_base < 0:
            raise ValueError("color_base must be >= 0")
        if self.palette_size < math.floor(self.delta) + 1:
            raise ValueError("palette does not cover the degree bound")

    @property
    def palette_size(self) -> int:
        return math.ceil((1.0 + math.sqrt(self.epsilon)) * self.delta)


class PaletteState:
    """Dense per-node availability table for one level.

    ``avail[u, c]`` says whether color c is still in P(u); ``size[u]`` is
    the row popcount, maintained incrementally.  On inputs that respect the
    level's degree bound, size[u] = palette_size - (picks made at u) never
    reaches zero.
    """

    def __init__(self, n_offline: int, cfg: LevelConfig):
        if n_offline < 1:
            raise ValueError("n_offline must be >= 1")
        self.cfg = cfg
        self.n_offline = n_offline
        self.avail = np.ones((n_offline, cfg.palette_size), dtype=bool)
        self.size = np.full(n_offline, cfg.palette_size, dtype=np.int64)

    def removed_count(self, u: int) -> int:
        return self.cfg.palette_size - int(self.size[u])

    def palette(self, u: int) -> tuple[int, ...]:
        return tuple(int(c) for c in np.flatnonzero(self.avail[u]))

    def x_row(self, u: int) -> np.ndarray:
        """Current availability weights of node u (zeros when exhausted)."""
        if self.size[u] == 0:
            return np.zeros(self.cfg.palette_size)
        return self.avail[u] / float(self.size[u])


def init_level(n_offline: int, cfg: LevelConfig) -> PaletteState:
    """Fresh palettes: every node holds all palette_size colors."""
    return PaletteState(n_offline, cfg)


@dataclass
class StepOutcome:
    """Everything one arrival produced at one level.

    ``picks`` aligns with the arrival's neighbor order; -1 marks an edge
    skipped because its node's palette was empty (possible only on inputs
    that violate the level's degree bound).  ``winners`` maps each picked
    color to the neighbor position that won it.  ``loads`` is the snapshot
    per-color load vector S_c = sum_u x[u, c] over the non-skipped
    neighbors.  ``x`` is the full snapshot matrix when requested.
    """

    t: int
    neighbors: tuple[int, ...]
    picks: np.ndarray
    winners: dict[int, int]
    loads: np.ndarray
    sizes_before: np.ndarray
    skipped: tuple[int, ...]
    x: np.ndarray | None = None

    @property
    def colored_positions(self) -> set[int]:
        return set(self.winners.values())

    @property
    def uncolored_positions(self) -> tuple[int, ...]:
        won = self.colored_positions
        return tuple(p for p in range(len(self.neighbors)) if p not in won)

    @property
    def colored_count(self) -> int:
        return len(self.winners)


def process_arrival(
    state: PaletteState,
    arrival: OnlineArrival,
    scheme,
    rng: np.random.Generator,
    *,
    t: int = -1,
    want_x: bool = False,
) -> StepOutcome:
    """Run one arrival through the level; mutates ``state`` in place.

    Color picks use the palettes as they stand at the start of the step (the
    snapshot), every pick is removed, and ``scheme.select`` is called once
    per picked color, in ascending color order, over the picking edges'
    snapshot weights.  Assigned colors always equal the winner's own pick.
    """
    nb = np.asarray(arrival.neighbors, dtype=np.int64)
    n_edges = len(nb)
    palette_size = state.cfg.palette_size
    picks = np.full(n_edges, -1, dtype=np.int64)
    sizes_before = state.size[nb].copy() if n_edges else np.zeros(0, dtype=np.int64)
    loads = np.zeros(palette_size)
    winners: dict[int, int] = {}
    x_dense: np.ndarray | None = None

    active = sizes_before > 0
    skipped = tuple(int(p) for p in np.flatnonzero(~active))
    if skipped:
        logger.warning("arrival %d: %d edges skipped on empty palettes", t, len(skipped))

    act_pos = np.flatnonzero(active)
    if act_pos.size:
        act_nodes = nb[act_pos]
        act_sizes = sizes_before[act_pos]
        snap = state.avail[act_nodes]  # advanced indexing copies: a true snapshot
        if not np.array_equal(snap.sum(axis=1), act_sizes):
            raise AssertionError("palette size ledger out of sync with availability table")
        inv = 1.0 / act_sizes
        loads = inv @ snap
        if want_x:
            x_dense = np.zeros((n_edges, palette_size))
            x_dense[act_pos] = snap * inv[:, None]

        targets = (rng.random(act_pos.size) * act_sizes).astype(np.int64)
        cum = snap.cumsum(axis=1)
        local = (cum > targets[:, None]).argmax(axis=1)
        picks[act_pos] = local

        state.avail[act_nodes, local] = False
        state.size[act_nodes] -= 1

        by_color: dict[int, list[int]] = {}
        for pos, c, w in zip(act_pos, local, inv):
            by_color.setdefault(int(c), []).append(int(pos))
        inv_by_pos = np.zeros(n_edges)
        inv_by_pos[act_pos] = inv
        for c in sorted(by_color):
            members = by_color[c]
            chosen = scheme.select(inv_by_pos[members], rng)
            if chosen is not None:
                winners[c] = members[chosen]

    return StepOutcome(
        t=t,
        neighbors=arrival.neighbors,
        picks=picks,
        winners=winners,
        loads=loads,
        sizes_before=sizes_before,
        skipped=skipped,
        x=x_dense,
    )


@dataclass
class StepRecord:
    """Compact transcript entry: enough to replay palettes deterministically."""

    t: int
    neighbors: tuple[int, ...]
    picks: tuple[int, ...]
    winners: tuple[tuple[int, int], ...]  # (local color, neighbor position)


@dataclass
class LevelTranscript:
    """Append-only pick and award record of one level's whole run.

    Palettes are a deterministic function of the picks, so the transcript
    supports after-the-fact replay: residual extraction and martingale
    traces recompute state evolution without rerunning the scheme.
    """

    cfg: LevelConfig
    n_offline: int
    steps: list[StepRecord] = field(default_factory=list)

    def append(self, outcome: StepOutcome) -> None:
        self.steps.append(
            StepRecord(
                t=outcome.t,
                neighbors=outcome.neighbors,
                picks=tuple(int(c) for c in outcome.picks),
                winners=tuple(sorted((c, p) for c, p in outcome.winners.items())),
            )
        )

    def pick_events(self):
        """Yield (i, u, local color) for every pick, i counting from 1."""
        i = 0
        for step in self.steps:
            for u, c in zip(step.neighbors, step.picks):
                if c >= 0:
                    i += 1
                    yield i, u, c

    @property
    def total_picks(self) -> int:
        return sum(1 for _ in self.pick_events())


@dataclass
class LevelResult:
    transcript: LevelTranscript
    state: PaletteState
    assignment_local: list[tuple[int | None, ...]]
    colored: int
    skips: int
    loads_rows: list[tuple[int, np.ndarray]] | None


def run_level(
    instance: Instance,
    cfg: LevelConfig,
    scheme,
    rng: np.random.Generator,
    *,
    collect_loads: bool = False,
    on_step=None,
) -> LevelResult:
    """Feed a whole (oblivious) instance through one level."""
    state = init_level(instance.header.n_offline, cfg)
    transcript = LevelTranscript(cfg=cfg, n_offline=instance.header.n_offline)
    assignment: list[tuple[int | None, ...]] = []
    loads_rows: list[tuple[int, np.ndarray]] | None = [] if collect_loads else None
    colored = 0
    skips = 0
    for t, arrival in enumerate(instance.arrivals):
        out = process_arrival(state, arrival, scheme, rng, t=t)
        transcript.append(out)
        row: list[int | None] = [None] * len(arrival.neighbors)
        for c, pos in out.winners.items():
            row[pos] = c
        assignment.append(tuple(row))
        colored += out.colored_count
        skips += len(out.skipped)
        if loads_rows is not None:
            loads_rows.append((t, out.loads))
        if on_step is not None:
            on_step(state, out)
    return LevelResult(
        transcript=transcript,
        state=state,
        assignment_local=assignment,
        colored=colored,
        skips=skips,
        loads_rows=loads_rows,
    )


def residual_subgraph(transcript: LevelTranscript) -> Instance:
    """Instance of the edges the level left uncolored, in arrival order.

    Arrivals whose edges were all colored are dropped.  The header keeps the
    original offline side and declares delta equal to the observed residual
    max degree over both sides (minimum 1, so an empty residual still forms
    a valid header).
    """
    arrivals: list[OnlineArrival] = []
    off_deg = np.zeros(transcript.n_offline, dtype=np.int64)
    max_online = 0
    for step in transcript.steps:
        won = {p for _, p in step.winners}
        rest = tuple(u for p, u in enumerate(step.neighbors) if p not in won)
        if rest:
            arrivals.append(OnlineArrival(rest))
            for u in rest:
                off_deg[u] += 1
            max_online = max(max_online, len(rest))
    observed = max(int(off_deg.max()) if len(off_deg) else 0, max_online)
    header = InstanceHeader(n_offline=transcript.n_offline, delta=max(1, observed))
    return Instance(header=header, arrivals=arrivals)
