"""Shared fixtures.

The expensive fixture is a batch of 20 single-level runs at n=1000, delta=64,
epsilon=0.1 (the standard desk-scale configuration); it is session scoped and
lazy, so only test selections that touch it pay the ~15 s.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pytest

from oec.crs import ExpClockScheme
from oec.generators import gen_random_regular
from oec.partial import LevelConfig, LevelResult, residual_subgraph, run_level
from oec.seeding import derive_seed
from oec.stream import Instance, realized_max_degree

STD_N = 1000
STD_DELTA = 64
STD_EPS = 0.1
STD_SEEDS = 20


@dataclass
class RegularRun:
    seed: int
    instance: Instance
    result: LevelResult
    colored_fraction: float
    residual_max: int

    @property
    def max_not_good(self) -> int:
        """Worst per-step count of colors with snapshot load above 1 + eps."""
        return max(
            int((loads > 1.0 + STD_EPS).sum()) for _, loads in self.result.loads_rows
        )


def _one_regular_run(seed: int) -> RegularRun:
    instance = gen_random_regular(STD_N, STD_DELTA, seed=1000 + seed)
    cfg = LevelConfig(delta=float(STD_DELTA), epsilon=STD_EPS)
    rng = np.random.Generator(np.random.PCG64(derive_seed(seed, "level:0")))
    result = run_level(instance, cfg, ExpClockScheme(), rng, collect_loads=True)
    residual = residual_subgraph(result.transcript)
    return RegularRun(
        seed=seed,
        instance=instance,
        result=result,
        colored_fraction=result.colored / instance.m,
        residual_max=realized_max_degree(residual),
    )


@pytest.fixture(scope="session")
def regular_runs() -> list[RegularRun]:
    """20 independent runs of the single-level algorithm on fresh regular instances."""
    return [_one_regular_run(s) for s in range(STD_SEEDS)]
