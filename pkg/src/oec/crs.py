"""Single-winner contention resolution for independently activated elements.

Elements 0..n-1 carry marginals x_i in [0,1].  Nature activates each element
independently with probability x_i; a scheme then selects exactly one winner
from the realized active set (or none, only when the set is empty).

The clock-race scheme gives each active element an alarm clock distributed
as an exponential with rate l_i = -ln(1 - x_i), truncated to [0,1]; the
earliest alarm wins.  Equivalently, element i's alarm is the first point of
a rate-l_i Poisson process conditioned to fire within [0,1], which happens
with probability exactly x_i.  Racing the superposed processes gives the
closed-form unconditional selection marginal

    P[i wins] = (l_i / L) * (1 - exp(-L)),   L = sum_j l_j.

Useful facts, all covered by tests:

* the winner marginals sum to 1 - prod(1 - x_j), the probability that at
  least one element is active;
* when all x_i are equal the marginal equals the fair share
  x_i * (1 - prod(1 - x_j)) / sum(x_j) exactly;
* in general it is at least (1 - max_j x_j) times the fair share, because
  l_i >= x_i and L <= sum(x_j) / (1 - max_j x_j).

Elements with x_i = 1 have infinite rate: their alarms ring at time 0 and
ties among them break uniformly at random.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

_PROB_TOL = 1e-12


def _as_prob_array(x: "MarginalVector | Sequence[float] | np.ndarray") -> np.ndarray:
    if isinstance(x, MarginalVector):
        return np.asarray(x.x, dtype=np.float64)
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError("marginal vector must be one dimensional")
    if arr.size and (arr.min() < -_PROB_TOL or arr.max() > 1 + _PROB_TOL):
        raise ValueError("marginals must lie in [0, 1]")
    return np.clip(arr, 0.0, 1.0)


@dataclass(frozen=True)
class MarginalVector:
    """Marginal activation probabilities with cached log-rate quantities."""

    x: tuple[float, ...]

    def __post_init__(self):
        arr = np.asarray(self.x, dtype=np.float64)
        if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
            raise ValueError("marginals must lie in [0, 1]")
        # prod(1-x) and exp(-sum l) are the same number; guard the identity
        # against rounding so downstream code may use either form.
        finite = arr[arr < 1.0]
        if finite.size:
            direct = float(np.prod(1.0 - finite))
            via_logs = float(np.exp(np.sum(np.log1p(-finite))))
            if abs(direct - via_logs) > 1e-12:
                raise AssertionError("empty-set probability identity violated")

    @property
    def n(self) -> int:
        return len(self.x)

    @property
    def total(self) -> float:
        return float(np.sum(self.x))

    @property
    def rates(self) -> np.ndarray:
        """Per-element rates l_i = -ln(1 - x_i), inf where x_i = 1."""
        arr = np.asarray(self.x, dtype=np.float64)
        out = np.full(arr.shape, np.inf)
        lt1 = arr < 1.0
        out[lt1] = -np.log1p(-arr[lt1])
        return out

    @property
    def empty_prob(self) -> float:
        """Probability that no element activates, prod(1 - x_j)."""
        return float(np.prod(1.0 - np.asarray(self.x, dtype=np.float64)))


@dataclass(frozen=True)
class ActiveSet:
    """Realized set of activated element indices."""

    members: frozenset[int]

    @classmethod
    def of(cls, ids: Iterable[int]) -> "ActiveSet":
        return cls(frozenset(int(i) for i in ids))

    def __bool__(self) -> bool:
        return bool(self.members)


@dataclass(frozen=True)
class Selection:
    """Outcome of one contention resolution: the winning element, if any."""

    winner: int | None


def fair_bound(x: "MarginalVector | Sequence[float] | np.ndarray") -> np.ndarray:
    """Fair selection share b_i = x_i * (1 - prod(1 - x_j)) / sum(x_j).

    Returns zeros for the all-zero vector.
    """
    arr = _as_prob_array(x)
    s = arr.sum()
    if s <= 0.0:
        return np.zeros_like(arr)
    hit = 1.0 - np.prod(1.0 - arr)
    return arr * (hit / s)


def selection_prob_exact(x: "MarginalVector | Sequence[float] | np.ndarray") -> np.ndarray:
    """Exact clock-race winner marginals (l_i / L) * (1 - exp(-L)).

    With k elements at x = 1 the total mass 1 splits equally among them and
    every other element has probability 0.  The all-zero vector returns
    zeros.
    """
    arr = _as_prob_array(x)
    out = np.zeros_like(arr)
    ones = arr >= 1.0
    if ones.any():
        out[ones] = 1.0 / ones.sum()
        return out
    ell = -np.log1p(-arr)
    big_l = ell.sum()
    if big_l <= 0.0:
        return out
    return (ell / big_l) * (1.0 - np.exp(-big_l))


def _clock_times(x_active: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Draw one truncated-exponential alarm per active element.

    Inverse CDF on [0,1]: T = -ln(1 - u * x) / l with l = -ln(1 - x).
    x = 1 rings at time 0; those alarms are replaced by -u so that ties
    among them break uniformly while still beating every positive alarm.
    x = 0 is the rate-0 limit, a uniform alarm on [0,1].
    """
    x_active = np.asarray(x_active, dtype=np.float64)
    u = rng.random(x_active.size)
    t = np.empty_like(u)
    ones = x_active >= 1.0
    zeros = x_active <= 0.0
    mid = ~(ones | zeros)
    if mid.any():
        ell = -np.log1p(-x_active[mid])
        t[mid] = -np.log1p(-u[mid] * x_active[mid]) / ell
    t[ones] = -u[ones]
    t[zeros] = u[zeros]
    return t


class ExpClockScheme:
    """Clock-race scheme: earliest truncated-exponential alarm wins."""

    name = "exp-clock"

    def select(self, x_active: np.ndarray, rng: np.random.Generator) -> int | None:
        if len(x_active) == 0:
            return None
        return int(np.argmin(_clock_times(x_active, rng)))


class UniformScheme:
    """Baseline scheme: a uniformly random active element wins."""

    name = "uniform"

    def select(self, x_active: np.ndarray, rng: np.random.Generator) -> int | None:
        if len(x_active) == 0:
            return None
        return int(rng.integers(len(x_active)))


class NeverSelectScheme:
    """Degenerate stub that never awards a winner.

    Deliberately violates the one-winner contract; only useful to ablate a
    coloring run down to its greedy tail in tests.
    """

    name = "never"

    def select(self, x_active: np.ndarray, rng: np.random.Generator) -> int | None:
        return None


SCHEMES = {
    "exp-clock": ExpClockScheme,
    "uniform": UniformScheme,
}


def get_scheme(name: str):
    try:
        return SCHEMES[name]()
    except KeyError:
        raise ValueError(f"unknown contention resolution scheme {name!r}") from None


def _resolve(scheme, r: ActiveSet, x: MarginalVector, rng: np.random.Generator) -> Selection:
    members = sorted(r.members)
    if not members:
        return Selection(winner=None)
    for i in members:
        if not (0 <= i < x.n):
            raise ValueError(f"active element {i} outside the marginal vector")
    x_arr = np.asarray(x.x, dtype=np.float64)[members]
    idx = scheme.select(x_arr, rng)
    return Selection(winner=members[idx])


def exp_clock_select(r: ActiveSet, x: MarginalVector, rng: np.random.Generator) -> Selection:
    """Run one clock race over the active set; winner iff the set is nonempty."""
    return _resolve(ExpClockScheme(), r, x, rng)


def uniform_select(r: ActiveSet, x: MarginalVector, rng: np.random.Generator) -> Selection:
    """Select a uniformly random member of the active set."""
    return _resolve(UniformScheme(), r, x, rng)


def uniform_marginals_exact(x: "MarginalVector | Sequence[float] | np.ndarray") -> np.ndarray:
    """Winner marginals of the uniform scheme by exhaustive enumeration.

    Sums x restricted to each of the 2^n activation patterns, so only
    sensible for small n; used as an independent oracle for Monte Carlo.
    """
    arr = _as_prob_array(x)
    n = arr.size
    if n > 20:
        raise ValueError("enumeration oracle limited to n <= 20")
    out = np.zeros(n)
    for mask in range(1, 1 << n):
        p = 1.0
        members = []
        for i in range(n):
            if mask >> i & 1:
                p *= arr[i]
                members.append(i)
            else:
                p *= 1.0 - arr[i]
        share = p / len(members)
        for i in members:
            out[i] += share
    return out


def monte_carlo_marginals(
    x: "MarginalVector | Sequence[float] | np.ndarray",
    scheme: str,
    trials: int,
    seed: int,
    *,
    chunk: int = 125_000,
) -> tuple[np.ndarray, np.ndarray]:
    """Estimate winner marginals over independent activations.

    Each trial activates elements independently with probability x_i and
    applies the named scheme to the realized active set.  Returns empirical
    win frequencies and their standard errors (computed from the empirical
    frequency).  Vectorized in blocks of ``chunk`` trials.
    """
    arr = _as_prob_array(x)
    n = arr.size
    if scheme not in SCHEMES:
        raise ValueError(f"unknown contention resolution scheme {scheme!r}")
    rng = np.random.Generator(np.random.PCG64(seed))
    wins = np.zeros(n, dtype=np.int64)
    ones = arr >= 1.0
    zeros = arr <= 0.0
    mid = ~(ones | zeros)
    ell = np.zeros(n)
    ell[mid] = -np.log1p(-arr[mid])
    done = 0
    while done < trials:
        block = min(chunk, trials - done)
        active = rng.random((block, n)) < arr
        if scheme == "exp-clock":
            u = rng.random((block, n))
            t = np.empty((block, n))
            if mid.any():
                t[:, mid] = -np.log1p(-u[:, mid] * arr[mid]) / ell[mid]
            t[:, ones] = -u[:, ones]
            t[:, zeros] = u[:, zeros]
            t[~active] = np.inf
            winner = np.argmin(t, axis=1)
        else:
            keys = rng.random((block, n))
            keys[~active] = -1.0
            winner = np.argmax(keys, axis=1)
        any_active = active.any(axis=1)
        wins += np.bincount(winner[any_active], minlength=n)
        done += block
    emp = wins / float(trials)
    se = np.sqrt(emp * (1.0 - emp) / float(trials))
    return emp, se
