"""Instance generators: regular, binomial and first-fit worst cases."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .stream import BudgetTooSmall, Instance, InstanceHeader, OnlineArrival

_REPAIR_PASS_CAP = 1000


@dataclass(frozen=True)
class GenSpec:
    """Declarative generator request, as used by run configs and sweeps."""

    kind: str  # "regular" | "binomial" | "greedy-hard"
    n_offline: int
    delta: int
    seed: int = 0
    n_online: int | None = None  # binomial only; defaults to n_offline
    edge_prob: float | None = None  # binomial only

    def build(self) -> Instance:
        if self.kind == "regular":
            return gen_random_regular(self.n_offline, self.delta, self.seed)
        if self.kind == "binomial":
            n_on = self.n_online if self.n_online is not None else self.n_offline
            p = self.edge_prob if self.edge_prob is not None else 0.5
            return gen_binomial(self.n_offline, n_on, p, self.delta, self.seed)
        if self.kind == "greedy-hard":
            return gen_greedy_hard(self.delta, self.n_offline, self.seed)
        raise ValueError(f"unknown generator kind {self.kind!r}")


def gen_random_regular(n: int, delta: int, seed: int) -> Instance:
    """Random delta-regular bipartite instance on n + n nodes.

    Takes the union of delta random perfect matchings (one permutation per
    matching) and repairs collisions, where two matchings pair the same
    online node with the same offline node, by swapping the colliding entry
    with a random other position of the same permutation.  Swapping inside a
    permutation preserves offline degrees, so both sides end exactly
    delta-regular.  Repair sweeps until clean, failing loudly if the pass
    cap is hit (only plausible when delta is close to n).
    """
    if not (1 <= delta <= n):
        raise ValueError(f"need 1 <= delta <= n, got delta={delta}, n={n}")
    rng = np.random.Generator(np.random.PCG64(seed))
    perms = np.stack([rng.permutation(n) for _ in range(delta)])
    for _ in range(_REPAIR_PASS_CAP):
        collisions = 0
        for v in range(n):
            seen: set[int] = set()
            for k in range(delta):
                u = int(perms[k, v])
                if u in seen:
                    collisions += 1
                    w = int(rng.integers(n - 1))
                    if w >= v:
                        w += 1  # never swap with self, that is a no-op
                    perms[k, v], perms[k, w] = perms[k, w], perms[k, v]
                else:
                    seen.add(u)
        if collisions == 0:
            break
    else:
        raise RuntimeError(f"matching repair did not converge for n={n}, delta={delta}")
    header = InstanceHeader(n_offline=n, delta=delta)
    arrivals = [OnlineArrival(tuple(sorted(int(u) for u in perms[:, v]))) for v in range(n)]
    return Instance(header=header, arrivals=arrivals)


def gen_binomial(n_off: int, n_on: int, p: float, delta_cap: int, seed: int) -> Instance:
    """Erdos-Renyi style bipartite instance with a hard degree cap.

    Each of the n_off * n_on potential edges appears independently with
    probability p; edges that would push either endpoint past delta_cap are
    dropped in arrival order (online nodes in order, neighbors by ascending
    id).  The header declares delta = delta_cap.
    """
    if not (0.0 <= p <= 1.0):
        raise ValueError(f"edge probability must be in [0, 1], got {p}")
    if not (1 <= delta_cap <= n_off):
        raise ValueError(f"need 1 <= delta_cap <= n_off, got {delta_cap}")
    rng = np.random.Generator(np.random.PCG64(seed))
    off_deg = np.zeros(n_off, dtype=np.int64)
    arrivals: list[OnlineArrival] = []
    for _ in range(n_on):
        proposed = np.flatnonzero(rng.random(n_off) < p)
        kept: list[int] = []
        for u in proposed:
            if len(kept) >= delta_cap:
                break
            if off_deg[u] < delta_cap:
                off_deg[u] += 1
                kept.append(int(u))
        if kept:
            arrivals.append(OnlineArrival(tuple(kept)))
    return Instance(header=InstanceHeader(n_offline=n_off, delta=delta_cap), arrivals=arrivals)


def greedy_hard_required_budget(delta: int) -> int:
    """Arrivals needed by gen_greedy_hard: delta*(delta-1) build-up plus one."""
    return delta * (delta - 1) + 1


def gen_greedy_hard(delta: int, n_budget: int, seed: int = 0) -> Instance:
    """Instance forcing first-fit to exactly 2*delta - 1 colors.

    Build-up rounds present singleton arrivals to delta target nodes so that
    after round r every target has used exactly colors {0..r}; the final
    arrival spans all delta targets, whose identical used sets are disjoint
    from the colors the final online node accumulates, pushing its last edge
    to color index 2*delta - 2.  The construction is deterministic; seed is
    accepted for interface uniformity.

    n_budget bounds both sides: the emitted header uses n_offline = n_budget
    and the arrival count delta*(delta-1) + 1 must fit within it.
    """
    del seed
    if delta < 1:
        raise ValueError("delta must be >= 1")
    required = max(delta, greedy_hard_required_budget(delta))
    if n_budget < required:
        raise BudgetTooSmall(required)
    arrivals: list[OnlineArrival] = []
    for _ in range(delta - 1):
        for u in range(delta):
            arrivals.append(OnlineArrival((u,)))
    arrivals.append(OnlineArrival(tuple(range(delta))))
    return Instance(header=InstanceHeader(n_offline=n_budget, delta=delta), arrivals=arrivals)


def regular_fraction_estimate(delta: int, epsilon: float) -> float:
    """Closed-form expected colored fraction per arrival for a regular run.

    With palette size P = ceil((1 + sqrt(eps)) * delta) every availability
    weight has mean exactly 1/P, independently across offline nodes, so the
    expected number of distinct picked colors at a degree-delta arrival is
    P * (1 - (1 - 1/P)^delta) at every time step.  Dividing by delta gives
    the expected colored fraction; useful as an independent oracle for
    simulation tests.
    """
    pal = math.ceil((1.0 + math.sqrt(epsilon)) * delta)
    return pal * (1.0 - (1.0 - 1.0 / pal) ** delta) / delta
