"""Arrival sources: oblivious replay and adaptive attack strategies.

A source is anything with ``next_arrival(view) -> OnlineArrival | None``,
where the view exposes the full run transcript (palettes, assignments,
picks, degree ledger, plan).  Adaptive strategies may read all of it; the
oblivious replay ignores it.  Every source is responsible for respecting
the declared degree budgets, so its output always passes strict stream
validation inside the run loop.
"""
from __future__ import annotations

import math
from typing import Protocol

import numpy as np

from .stream import Instance, OnlineArrival


class ArrivalSource(Protocol):
    def next_arrival(self, view) -> OnlineArrival | None: ...


class ReplaySource:
    """Plays a fixed instance in file order, ignoring the view."""

    def __init__(self, instance: Instance):
        self._arrivals = list(instance.arrivals)
        self._pos = 0

    def next_arrival(self, view) -> OnlineArrival | None:
        if self._pos >= len(self._arrivals):
            return None
        arrival = self._arrivals[self._pos]
        self._pos += 1
        return arrival


class LoadAttacker:
    """Adaptive strategy that piles weight onto the currently heaviest colors.

    Each step it inspects the first level's palettes and takes C = the
    ``ceil(color_frac * delta)`` colors with the largest total availability
    mass over budget-eligible offline nodes, then U = the ``delta`` eligible
    nodes carrying the most of C's mass.  U arrives as the next neighborhood.
    All ties break toward lower ids and the emitted neighbor list is sorted,
    so the strategy is a deterministic function of the view.

    Against a run without palettes (the first-fit baseline) it falls back to
    hammering the nodes with the most remaining degree budget.  Stops when
    its arrival budget runs out or no offline node has budget left.

    ``last_pair`` holds the (U, C) of the most recent emission for probing;
    it is None after a fallback emission.
    """

    def __init__(self, delta: int, color_frac: float, arrivals_budget: int):
        if delta < 1:
            raise ValueError("delta must be >= 1")
        if not 0.0 < color_frac:
            raise ValueError("color_frac must be > 0")
        if arrivals_budget < 0:
            raise ValueError("arrivals_budget must be >= 0")
        self.delta = delta
        self.color_frac = color_frac
        self.arrivals_budget = arrivals_budget
        self.emitted = 0
        self.last_pair: tuple[tuple[int, ...], tuple[int, ...]] | None = None

    def next_arrival(self, view) -> OnlineArrival | None:
        if self.emitted >= self.arrivals_budget:
            return None
        remaining = view.remaining_budget()
        eligible = np.flatnonzero(remaining > 0)
        if eligible.size == 0:
            return None
        k_nodes = min(self.delta, eligible.size)

        state = view.top_palettes()
        if state is None:
            order = np.lexsort((eligible, -remaining[eligible]))
            chosen = np.sort(eligible[order[:k_nodes]])
            self.last_pair = None
        else:
            weights = np.where(state.size > 0, 1.0 / np.maximum(state.size, 1), 0.0)
            mass = weights[eligible] @ state.avail[eligible]
            k_colors = min(max(1, math.ceil(self.color_frac * self.delta)), mass.size)
            cols = np.arange(mass.size)
            c_order = np.lexsort((cols, -mass))
            c_set = np.sort(cols[c_order[:k_colors]])
            row_mass = state.avail[np.ix_(eligible, c_set)].sum(axis=1) * weights[eligible]
            u_order = np.lexsort((eligible, -row_mass))
            chosen = np.sort(eligible[u_order[:k_nodes]])
            self.last_pair = (
                tuple(int(u) for u in chosen),
                tuple(int(c) for c in c_set),
            )
        self.emitted += 1
        return OnlineArrival(tuple(int(u) for u in chosen))


class GreedyKiller:
    """Adaptive strategy forcing first-fit to its 2*delta - 1 color worst case.

    Dedicates offline nodes 0..delta-1 as targets.  While some target can
    still take an edge and leave room for the finale, it sends a singleton
    arrival to the least-loaded target; against first-fit this grows every
    target's incident color set to the same delta-1 low colors.  Once all
    targets sit at degree delta-1 it sends one arrival adjacent to all of
    them, whose delta edges must take delta fresh colors.  Degrees are read
    from the view, so the strategy also plays (without the guarantee)
    against randomized algorithms.
    """

    def __init__(self, delta: int, n_offline: int):
        if delta < 1:
            raise ValueError("delta must be >= 1")
        if n_offline < delta:
            raise ValueError(f"need n_offline >= delta, got {n_offline} < {delta}")
        self.delta = delta
        self.targets = tuple(range(delta))
        self._deg = np.zeros(delta, dtype=np.int64)
        self._seen_t = 0
        self._done = False

    @staticmethod
    def required_arrivals(delta: int) -> int:
        return delta * (delta - 1) + 1

    def _ingest(self, view) -> None:
        while self._seen_t < len(view.arrivals):
            for u in view.arrivals[self._seen_t].neighbors:
                if u < self.delta:
                    self._deg[u] += 1
            self._seen_t += 1

    def next_arrival(self, view) -> OnlineArrival | None:
        if self._done:
            return None
        self._ingest(view)
        grow = [u for u in self.targets if self._deg[u] < self.delta - 1]
        if grow:
            u = min(grow, key=lambda v: (int(self._deg[v]), v))
            return OnlineArrival((u,))
        self._done = True
        if all(self._deg[u] < self.delta for u in self.targets):
            return OnlineArrival(self.targets)
        return None
