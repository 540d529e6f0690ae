"""Arrival streams for one-sided online bipartite graphs.

An instance is a JSON-lines document.  The first record is a header object
``{"n_offline": <int>, "delta": <int>}`` naming the number of offline nodes
and the degree bound the stream promises to respect.  Every following record
is one online arrival ``{"neighbors": [<offline ids>]}``; the arrival order
of the lines is the arrival order of the online nodes.

Parsing checks structure only (well formed JSON, ids in range, no duplicate
neighbors, at least one neighbor).  Degree accounting against ``delta`` is a
separate concern handled by :class:`DegreeLedger` and
:func:`validate_arrival`, so that adaptively generated arrivals can be
checked one at a time with the same code path.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Iterator

import numpy as np


class StreamError(Exception):
    """Base class for instance format and degree-validation errors."""


class MalformedRecord(StreamError):
    def __init__(self, line_no: int, reason: str):
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"line {line_no}: {reason}")


class HeaderError(StreamError):
    pass


class IdOutOfRange(StreamError):
    def __init__(self, node: int, t: int):
        self.node = node
        self.t = t
        super().__init__(f"arrival {t}: neighbor id {node} out of range")


class DuplicateNeighbor(StreamError):
    def __init__(self, node: int, t: int):
        self.node = node
        self.t = t
        super().__init__(f"arrival {t}: duplicate neighbor id {node}")


class DegreeExceeded(StreamError):
    """An arrival would push a node past the declared degree bound.

    ``side`` is "offline" when an offline node's degree would exceed delta
    and "online" when the arrival itself has more than delta neighbors (in
    which case ``node`` is the arrival index).
    """

    def __init__(self, node: int, t: int, side: str = "offline"):
        self.node = node
        self.t = t
        self.side = side
        if side == "offline":
            msg = f"arrival {t}: offline node {node} would exceed the degree bound"
        else:
            msg = f"arrival {t}: online degree exceeds the bound"
        super().__init__(msg)


class BudgetTooSmall(StreamError):
    def __init__(self, required: int):
        self.required = required
        super().__init__(f"budget too small, need at least {required}")


@dataclass(frozen=True)
class InstanceHeader:
    """Declared shape of an instance: offline side size and degree bound."""

    n_offline: int
    delta: int

    def __post_init__(self):
        if self.n_offline < 1:
            raise HeaderError(f"n_offline must be >= 1, got {self.n_offline}")
        if not (1 <= self.delta <= self.n_offline):
            raise HeaderError(
                f"delta must satisfy 1 <= delta <= n_offline, got delta={self.delta}"
                f" with n_offline={self.n_offline}"
            )


@dataclass(frozen=True)
class OnlineArrival:
    """One online node, given by its offline neighbor ids in edge order."""

    neighbors: tuple[int, ...]

    def degree(self) -> int:
        return len(self.neighbors)


@dataclass
class Instance:
    header: InstanceHeader
    arrivals: list[OnlineArrival] = field(default_factory=list)

    @property
    def m(self) -> int:
        return sum(len(a.neighbors) for a in self.arrivals)

    @property
    def n_online(self) -> int:
        return len(self.arrivals)


@dataclass
class DegreeLedger:
    """Running offline degree counts over a validated stream."""

    offline_degree: np.ndarray
    arrivals_seen: int = 0

    @classmethod
    def fresh(cls, n_offline: int) -> "DegreeLedger":
        return cls(offline_degree=np.zeros(n_offline, dtype=np.int64))

    def remaining(self, delta: int) -> np.ndarray:
        return delta - self.offline_degree


def _check_neighbor_list(raw: object, n_offline: int, t: int, line_no: int) -> tuple[int, ...]:
    if not isinstance(raw, list):
        raise MalformedRecord(line_no, "neighbors must be a JSON array")
    out: list[int] = []
    seen: set[int] = set()
    for v in raw:
        if isinstance(v, bool) or not isinstance(v, int):
            raise MalformedRecord(line_no, f"neighbor id {v!r} is not an integer")
        if not (0 <= v < n_offline):
            raise IdOutOfRange(v, t)
        if v in seen:
            raise DuplicateNeighbor(v, t)
        seen.add(v)
        out.append(v)
    if not out:
        raise MalformedRecord(line_no, "arrival has no neighbors")
    return tuple(out)


def parse_instance(lines: Iterable[str]) -> Instance:
    """Parse JSONL text into an instance, reporting errors by line number.

    Blank lines are ignored.  Arrivals are checked structurally; degree
    bounds are not enforced here (see :func:`validate_arrival`).
    """
    header: InstanceHeader | None = None
    arrivals: list[OnlineArrival] = []
    for line_no, raw in enumerate(lines, start=1):
        text = raw.strip()
        if not text:
            continue
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(line_no, f"invalid JSON ({exc.msg})") from exc
        if not isinstance(obj, dict):
            raise MalformedRecord(line_no, "record must be a JSON object")
        if header is None:
            if "n_offline" not in obj or "delta" not in obj:
                raise HeaderError(f"line {line_no}: first record must carry n_offline and delta")
            n_off, delta = obj["n_offline"], obj["delta"]
            for v in (n_off, delta):
                if isinstance(v, bool) or not isinstance(v, int):
                    raise MalformedRecord(line_no, "header fields must be integers")
            header = InstanceHeader(n_offline=n_off, delta=delta)
        else:
            if "neighbors" not in obj:
                raise MalformedRecord(line_no, "arrival record must carry neighbors")
            t = len(arrivals)
            arrivals.append(OnlineArrival(_check_neighbor_list(obj["neighbors"], header.n_offline, t, line_no)))
    if header is None:
        raise HeaderError("empty stream: missing header record")
    return Instance(header=header, arrivals=arrivals)


def load_instance(source: str | Path | IO[str] | Iterable[str]) -> Instance:
    """Load an instance from a path, an open text file or an iterable of lines."""
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            return parse_instance(fh)
    return parse_instance(source)


def dump_instance(instance: Instance) -> str:
    """Serialize to canonical JSONL (fixed key order, one record per line)."""
    lines = [json.dumps({"n_offline": instance.header.n_offline, "delta": instance.header.delta})]
    for a in instance.arrivals:
        lines.append(json.dumps({"neighbors": list(a.neighbors)}))
    return "\n".join(lines) + "\n"


def save_instance(instance: Instance, path: str | Path) -> None:
    Path(path).write_text(dump_instance(instance), encoding="utf-8")


def validate_arrival(
    header: InstanceHeader,
    ledger: DegreeLedger,
    arrival: OnlineArrival,
    *,
    permissive: bool = False,
) -> tuple[DegreeLedger, OnlineArrival]:
    """Admit one arrival against the degree ledger.

    Strict mode raises on duplicate neighbors, out-of-range ids, online
    degree above delta, or any offline node already at delta.  Permissive
    mode instead drops the offending neighbors and admits the rest (the
    admitted arrival may be empty).  Returns the updated ledger together
    with the arrival as admitted; the ledger is updated in place.
    """
    t = ledger.arrivals_seen
    delta = header.delta
    kept: list[int] = []
    seen: set[int] = set()
    for u in arrival.neighbors:
        if not (0 <= u < header.n_offline):
            if permissive:
                continue
            raise IdOutOfRange(u, t)
        if u in seen:
            if permissive:
                continue
            raise DuplicateNeighbor(u, t)
        if len(kept) >= delta:
            if permissive:
                break
            raise DegreeExceeded(t, t, side="online")
        if ledger.offline_degree[u] >= delta:
            if permissive:
                continue
            raise DegreeExceeded(u, t, side="offline")
        seen.add(u)
        kept.append(u)
    admitted = OnlineArrival(tuple(kept))
    for u in kept:
        ledger.offline_degree[u] += 1
    ledger.arrivals_seen += 1
    return ledger, admitted


def validate_instance(
    instance: Instance,
    *,
    arrival_budget: int | None = None,
    permissive: bool = False,
) -> DegreeLedger:
    """Run the full stream through degree validation and return the ledger."""
    ledger = DegreeLedger.fresh(instance.header.n_offline)
    for t, arrival in enumerate(instance.arrivals):
        if arrival_budget is not None and t >= arrival_budget:
            raise StreamError(f"arrival budget {arrival_budget} exceeded at arrival {t}")
        validate_arrival(instance.header, ledger, arrival, permissive=permissive)
    return ledger


def degree_profile(ledger: DegreeLedger) -> dict[int, int]:
    """Histogram of offline degrees, including zero-degree nodes."""
    values, counts = np.unique(ledger.offline_degree, return_counts=True)
    return {int(v): int(c) for v, c in zip(values, counts)}


def realized_max_degree(instance: Instance) -> int:
    """Max degree over both sides of the realized graph (0 for no edges)."""
    deg = np.zeros(instance.header.n_offline, dtype=np.int64)
    best_online = 0
    for a in instance.arrivals:
        best_online = max(best_online, len(a.neighbors))
        for u in a.neighbors:
            deg[u] += 1
    best_offline = int(deg.max()) if len(deg) else 0
    return max(best_offline, best_online)


def iter_edges(arrivals: Iterable[OnlineArrival]) -> Iterator[tuple[int, int, int]]:
    """Yield (t, position, offline id) for every edge in arrival order."""
    for t, a in enumerate(arrivals):
        for pos, u in enumerate(a.neighbors):
            yield t, pos, u
