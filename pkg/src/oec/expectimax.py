"""Exact micro-scale game solver for online edge coloring.

Models coloring as a two-player game: the adversary chooses each arrival's
neighborhood (within degree budgets), the algorithm immediately assigns
distinct proper colors from a capped global palette, and the final score is
the number of distinct colors used.  Solving the tree exactly gives the
deterministic minimax value, or the worst-case expected value of a fixed
randomized policy with the adversary maximizing over arrivals.

Offline nodes are interchangeable up to the set of colors on their incident
edges (every edge is colored on arrival, so that set also encodes degree).
States are therefore canonicalized to sorted multisets of color-set
signatures, and adversary moves enumerate class multiplicities rather than
raw id subsets; two states with equal signature multisets have identical
subtrees.  This keeps exhaustive search exact while shrinking it by the
node-relabeling symmetry.  Hard size limits apply; the solver is a
ground-truth oracle for toy cases, not an algorithm that scales.
"""
from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from typing import Protocol

MAX_N_OFF = 8
MAX_DELTA = 3
MAX_COLOR_CAP = 8
MAX_ARRIVALS = 32


class LimitExceeded(ValueError):
    """Requested game size is beyond the supported micro scale."""


class PolicyError(ValueError):
    """A policy emitted an invalid action distribution."""


Sig = tuple[int, ...]  # sorted colors incident to one offline node
State = tuple[Sig, ...]  # sorted multiset of signatures, one per node
Move = tuple[tuple[Sig, int], ...]  # (signature, multiplicity) classes
Action = tuple[tuple[int, ...], ...]  # per-class sorted color sets


def initial_state(n_off: int) -> State:
    return ((),) * n_off


def canonical(sigs) -> State:
    return tuple(sorted(sigs))


def distinct_colors(state: State) -> int:
    return len({c for sig in state for c in sig})


def _check_limits(n_off: int, delta: int, arrival_budget: int, color_cap: int):
    if not 1 <= n_off <= MAX_N_OFF:
        raise LimitExceeded(f"n_off must be in [1, {MAX_N_OFF}], got {n_off}")
    if not 1 <= delta <= MAX_DELTA:
        raise LimitExceeded(f"delta must be in [1, {MAX_DELTA}], got {delta}")
    if not 0 <= arrival_budget <= MAX_ARRIVALS:
        raise LimitExceeded(
            f"arrival budget must be in [0, {MAX_ARRIVALS}], got {arrival_budget}"
        )
    if not 1 <= color_cap <= MAX_COLOR_CAP:
        raise LimitExceeded(f"color cap must be in [1, {MAX_COLOR_CAP}], got {color_cap}")


def iter_moves(state: State, delta: int):
    """All arrival neighborhoods as multisets over signature classes.

    A node is eligible while its degree (= signature size) is below delta;
    an arrival takes 1..delta nodes, at most once each, so class
    multiplicities are capped by class counts.
    """
    eligible = sorted(
        Counter(sig for sig in state if len(sig) < delta).items()
    )
    ranges = [range(cnt + 1) for _, cnt in eligible]
    for mult in itertools.product(*ranges):
        k = sum(mult)
        if 1 <= k <= delta:
            yield tuple(
                (sig, m) for (sig, _), m in zip(eligible, mult) if m > 0
            )


def iter_actions(move: Move, color_cap: int):
    """All proper assignments: disjoint color sets, one color per node.

    Class j with multiplicity m receives an m-subset of colors legal at its
    signature; sets are disjoint across classes because all edges share the
    online endpoint.  Nodes within a class are interchangeable, so only the
    set matters.
    """

    def rec(j: int, used: frozenset, acc: list):
        if j == len(move):
            yield tuple(acc)
            return
        sig, m = move[j]
        allowed = [c for c in range(color_cap) if c not in sig and c not in used]
        for combo in itertools.combinations(allowed, m):
            yield from rec(j + 1, used | frozenset(combo), acc + [combo])

    yield from rec(0, frozenset(), [])


def apply_move(state: State, move: Move, action: Action) -> State:
    pool = list(state)
    for (sig, m), combo in zip(move, action):
        for _ in range(m):
            pool.remove(sig)
        for c in combo:
            pool.append(tuple(sorted(sig + (c,))))
    return canonical(pool)


def _action_legal(move: Move, action: Action, color_cap: int) -> bool:
    if len(action) != len(move):
        return False
    used: set[int] = set()
    for (sig, m), combo in zip(move, action):
        if len(combo) != m or len(set(combo)) != m:
            return False
        for c in combo:
            if c in sig or c in used or not 0 <= c < color_cap:
                return False
        used.update(combo)
    return True


@dataclass(frozen=True)
class SolveResult:
    value: float  # int-valued, or inf when the adversary can bust the cap
    trace: tuple[tuple[Move, Action], ...]

    @property
    def feasible(self) -> bool:
        return math.isfinite(self.value)


def solve_deterministic(
    n_off: int, delta: int, arrival_budget: int, color_cap: int
) -> SolveResult:
    """Minimax distinct-color count over all deterministic algorithms.

    Adversary maximizes (and may stop early, so the value is monotone in
    the budget); algorithm minimizes.  Value inf means every algorithm can
    be forced past the cap.  The trace is one optimal line of play.
    """
    _check_limits(n_off, delta, arrival_budget, color_cap)
    memo: dict[tuple[State, int], float] = {}

    def value(state: State, left: int) -> float:
        base = float(distinct_colors(state))
        if left == 0:
            return base
        key = (state, left)
        if key in memo:
            return memo[key]
        best = base  # the adversary may stop here
        for move in iter_moves(state, delta):
            reply = math.inf
            for action in iter_actions(move, color_cap):
                reply = min(reply, value(apply_move(state, move, action), left - 1))
                if reply <= best:
                    break  # this move cannot beat an already-achieved max
            best = max(best, reply)
            if math.isinf(best):
                break
        memo[key] = best
        return best

    root = value(initial_state(n_off), arrival_budget)

    trace: list[tuple[Move, Action]] = []
    state, left = initial_state(n_off), arrival_budget
    while left > 0 and math.isfinite(root):
        here = value(state, left)
        if here == distinct_colors(state) and left < arrival_budget:
            break
        chosen = None
        for move in iter_moves(state, delta):
            replies = [
                (value(apply_move(state, move, a), left - 1), a)
                for a in iter_actions(move, color_cap)
            ]
            if not replies:
                continue
            reply, action = min(replies, key=lambda p: p[0])
            if reply == here:
                chosen = (move, action)
                break
        if chosen is None:
            break
        trace.append(chosen)
        state = apply_move(state, *chosen)
        left -= 1
    return SolveResult(value=root, trace=tuple(trace))


class Policy(Protocol):
    """Randomized online algorithm as exact per-move action distributions."""

    name: str

    def action_distribution(
        self, state: State, move: Move, color_cap: int
    ) -> list[tuple[Action, float]]: ...


class FirstFitPolicy:
    """Deterministic first-fit: each edge takes the lowest legal color.

    Edges are ordered by the move's canonical class order; within a class
    the chosen set is the lowest legal colors, which is exactly what
    per-edge first-fit produces there.
    """

    name = "first-fit"

    def action_distribution(self, state, move, color_cap):
        used: set[int] = set()
        action = []
        for sig, m in move:
            combo = []
            for _ in range(m):
                c = next(
                    (
                        c
                        for c in range(color_cap)
                        if c not in sig and c not in used
                    ),
                    None,
                )
                if c is None:
                    return []  # stuck: no legal completion
                combo.append(c)
                used.add(c)
            action.append(tuple(sorted(combo)))
        return [(tuple(action), 1.0)]


class UniformColorPolicy:
    """Each edge picks uniformly among its currently legal colors.

    Edges are processed sequentially in canonical class order; branches
    that land on the same per-class color sets are merged by summing their
    probabilities.
    """

    name = "uniform"

    def action_distribution(self, state, move, color_cap):
        merged: dict[Action, float] = {}

        def rec(j: int, taken_here: tuple[int, ...], used: frozenset, acc: tuple, p: float):
            if j == len(move):
                merged[acc] = merged.get(acc, 0.0) + p
                return
            sig, m = move[j]
            if len(taken_here) == m:
                rec(j + 1, (), used, acc + (tuple(sorted(taken_here)),), p)
                return
            legal = [c for c in range(color_cap) if c not in sig and c not in used]
            if not legal:
                merged[None] = merged.get(None, 0.0) + p  # stuck branch
                return
            share = p / len(legal)
            for c in legal:
                rec(j, taken_here + (c,), used | frozenset((c,)), acc, share)

        rec(0, (), frozenset(), (), 1.0)
        return sorted(merged.items(), key=lambda kv: (kv[0] is None, kv[0] or ()))


POLICIES = {"first-fit": FirstFitPolicy, "uniform": UniformColorPolicy}


@dataclass(frozen=True)
class EvalResult:
    value: float
    trace: tuple[tuple[Move, Action, float], ...]  # move, likeliest action, its prob

    @property
    def feasible(self) -> bool:
        return math.isfinite(self.value)


def evaluate_randomized(
    policy: Policy,
    n_off: int,
    delta: int,
    arrival_budget: int,
    color_cap: int | None = None,
) -> EvalResult:
    """Worst-case expected distinct colors of a fixed randomized policy.

    The adversary maximizes the expectation, reacting to realized colors
    (it observes the state after every arrival); chance nodes average over
    the policy's action distribution.  The default cap 2*delta - 1 is the
    first-fit worst case, enough for any sane policy.  A stuck branch
    (policy returns no or a partial distribution mass) scores inf.
    """
    if color_cap is None:
        color_cap = 2 * delta - 1
    _check_limits(n_off, delta, arrival_budget, color_cap)
    memo: dict[tuple[State, int], float] = {}

    def chance(state: State, move: Move, left: int) -> float:
        dist = policy.action_distribution(state, move, color_cap)
        if not dist:
            return math.inf
        total = 0.0
        ev = 0.0
        for action, p in dist:
            if p < -1e-12:
                raise PolicyError(f"negative probability {p}")
            total += p
            if action is None:
                return math.inf
            if not _action_legal(move, action, color_cap):
                raise PolicyError(f"illegal action {action} for move {move}")
            ev += p * value(apply_move(state, move, action), left - 1)
        if abs(total - 1.0) > 1e-9:
            raise PolicyError(f"probabilities sum to {total!r}, not 1")
        return ev

    def value(state: State, left: int) -> float:
        base = float(distinct_colors(state))
        if left == 0:
            return base
        key = (state, left)
        if key in memo:
            return memo[key]
        best = base
        for move in iter_moves(state, delta):
            best = max(best, chance(state, move, left))
            if math.isinf(best):
                break
        memo[key] = best
        return best

    root = value(initial_state(n_off), arrival_budget)

    trace: list[tuple[Move, Action, float]] = []
    state, left = initial_state(n_off), arrival_budget
    while left > 0 and math.isfinite(root):
        here = value(state, left)
        picked = None
        for move in iter_moves(state, delta):
            if abs(chance(state, move, left) - here) <= 1e-9 and here > distinct_colors(state):
                dist = [
                    (a, p)
                    for a, p in policy.action_distribution(state, move, color_cap)
                    if a is not None
                ]
                action, p = max(dist, key=lambda kv: (kv[1], kv[0]))
                picked = (move, action, p)
                break
        if picked is None:
            break
        trace.append(picked)
        state = apply_move(state, picked[0], picked[1])
        left -= 1
    return EvalResult(value=root, trace=tuple(trace))


def format_move(move: Move) -> str:
    parts = [
        f"{m} node(s) with colors {{{', '.join(map(str, sig)) or ''}}}"
        for sig, m in move
    ]
    return " + ".join(parts)


def format_action(action: Action) -> str:
    return "; ".join("{" + ", ".join(map(str, combo)) + "}" for combo in action)
