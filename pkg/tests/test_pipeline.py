"""Cascade planning, first-fit tail, and full-run drivers."""
import math

import pytest

from oec.adversary import ReplaySource
from oec.crs import NeverSelectScheme
from oec.generators import gen_random_regular
from oec.partial import epsilon_default
from oec.pipeline import (
    ALPHA,
    FirstFit,
    InfeasibleParameters,
    greedy_color,
    plan_levels,
    run_greedy,
    run_partial,
    run_pipeline,
    shrink_slack,
    stop_threshold_default,
)
from oec.stream import DegreeExceeded, OnlineArrival

E_INV = math.exp(-1.0)


# ---------------------------------------------------------------------------
# planning


def test_shrink_slack_frozen_at_reference_scale():
    # delta / ln n = 10^11 puts the slack at 3*sqrt(2)/10 exactly
    lam = shrink_slack(math.e, 1e11)
    assert lam == pytest.approx(0.4242640687119285, rel=1e-12)
    q = E_INV + lam
    assert q == pytest.approx(0.7921435098833709, rel=1e-12)
    assert q < 1.0


def test_shrink_slack_infeasible_at_desk_scale():
    # delta = 32 ln n, the regime every desk experiment lives in
    lam = shrink_slack(math.exp(4.0), 128)
    assert lam == pytest.approx(3.096024839202629, rel=1e-12)
    with pytest.raises(InfeasibleParameters) as err:
        plan_levels(math.exp(4.0), 128)
    assert err.value.lam == pytest.approx(lam, rel=1e-12)
    assert err.value.q == pytest.approx(E_INV + lam, rel=1e-12)


def test_plan_frozen_geometric_sequence():
    plan = plan_levels(1000, 64, q=0.5, threshold=8)
    assert plan.deltas == (64.0, 32.0, 16.0, 8.0)
    assert plan.greedy_base == 265
    assert plan.lam is None  # q was given directly
    assert plan.q == 0.5
    # disjoint color ranges: bases are the running palette total
    base = 0
    for cfg in plan.levels:
        assert cfg.color_base == base
        assert cfg.epsilon == pytest.approx(epsilon_default(1000, cfg.delta))
        base += cfg.palette_size
    assert base == plan.greedy_base


def test_plan_epsilon_override_sets_slack():
    plan = plan_levels(1000, 64, epsilon=0.01)
    assert plan.lam == pytest.approx(3.0 * math.sqrt(0.01))
    assert plan.q == pytest.approx(E_INV + 0.3)
    assert all(cfg.epsilon == 0.01 for cfg in plan.levels)


def test_plan_default_threshold():
    expect = 64.0**ALPHA * math.log(1000) ** (1.0 - ALPHA)
    assert stop_threshold_default(1000, 64) == pytest.approx(expect)
    plan = plan_levels(1000, 64, q=0.5)
    assert plan.threshold == pytest.approx(expect)
    assert plan.n_levels == 1  # 32 is already below the ~52.2 default floor


def test_plan_stop_floor_is_one():
    plan = plan_levels(1000, 8, q=0.5, threshold=0.001)
    # levels keep halving but stop before delta drops under 1
    assert plan.deltas == (8.0, 4.0, 2.0, 1.0)


def test_plan_domain_errors():
    with pytest.raises(ValueError):
        plan_levels(2, 64)
    with pytest.raises(ValueError):
        plan_levels(1000, 0.5)
    with pytest.raises(ValueError):
        plan_levels(1000, 64, epsilon=-0.1)
    with pytest.raises(ValueError):
        plan_levels(1000, 64, q=-0.2)
    with pytest.raises(ValueError):
        plan_levels(1000, 64, q=0.5, threshold=0.0)
    with pytest.raises(InfeasibleParameters) as err:
        plan_levels(1000, 64, q=1.0)
    assert err.value.lam is None


# ---------------------------------------------------------------------------
# first-fit


def test_first_fit_star_takes_consecutive_colors():
    ff = FirstFit(4, color_base=10)
    for k in range(3):
        assert ff.color_arrival((0,)) == (10 + k,)
    assert ff.colors_used == 3
    assert ff.top_color == 12
    assert ff.colored == 3


def test_first_fit_avoids_both_endpoints():
    ff = FirstFit(3)
    assert ff.color_arrival((0,)) == (0,)
    # edge to 0: color 0 taken at node 0; edge to 1: color 1 taken online
    assert ff.color_arrival((0, 1)) == (1, 0)
    # edge to 0: blocked by {0, 1} at node 0 and by 1 online, so color 2
    assert ff.color_arrival((1, 0)) == (1, 2)
    assert ff.colors_used == 3


def test_first_fit_contiguous_range_and_bound():
    for seed in range(5):
        inst = gen_random_regular(40, 6, seed=seed)
        rows = greedy_color(inst, color_base=7)
        used = {c for row in rows for c in row}
        assert used == set(range(7, 7 + len(used)))  # no gaps above the base
        assert len(used) <= 2 * 6 - 1


def test_greedy_color_base_offset_is_a_pure_shift():
    inst = gen_random_regular(30, 4, seed=9)
    plain = greedy_color(inst)
    shifted = greedy_color(inst, color_base=100)
    assert shifted == [tuple(c + 100 for c in row) for row in plain]


# ---------------------------------------------------------------------------
# run drivers


def test_run_greedy_matches_offline_first_fit():
    inst = gen_random_regular(50, 5, seed=3)
    record = run_greedy(ReplaySource(inst), 50, 5)
    assert record.algo == "greedy"
    assert record.assignment == greedy_color(inst)
    assert record.arrivals == inst.arrivals
    assert record.colors_used <= 2 * 5 - 1
    assert record.colored_count == record.m == inst.m
    assert record.realized_delta == 5
    assert record.tail_colors == record.colors_used


def test_run_partial_leaves_some_edges_uncolored():
    inst = gen_random_regular(100, 8, seed=1)
    record = run_partial(ReplaySource(inst), 100, 8, epsilon=0.25, master_seed=4)
    assert record.algo == "partial"
    assert record.skips == 0
    assert 0 < record.colored_count < record.m
    assert len(record.transcripts) == 1
    assert record.level_colored_counts() == [record.colored_count]
    assert record.as_instance().arrivals == inst.arrivals


def test_run_pipeline_colors_everything_within_budget():
    inst = gen_random_regular(200, 16, seed=5)
    record = run_pipeline(
        ReplaySource(inst), 200, 16, epsilon=0.1, q=0.55, threshold=2.0, master_seed=1
    )
    assert record.colored_count == record.m
    plan = record.plan
    assert record.tail_base == plan.greedy_base
    assert record.colors_used <= plan.greedy_base + 2 * 16 - 1
    assert all(c is not None for row in record.assignment for c in row)
    counts = record.level_colored_counts()
    assert sum(counts) + record.tail_colored == record.m


def test_run_pipeline_level_ranges_disjoint():
    inst = gen_random_regular(120, 8, seed=2)
    record = run_pipeline(
        ReplaySource(inst), 120, 8, epsilon=0.5, q=0.5, threshold=2.0, master_seed=9
    )
    plan = record.plan
    ranges = [
        range(cfg.color_base, cfg.color_base + cfg.palette_size)
        for cfg in plan.levels
    ]
    used = {c for row in record.assignment for c in row}
    for c in used:
        homes = [r for r in ranges if c in r]
        assert len(homes) <= 1
        if not homes:
            assert c >= plan.greedy_base


def test_pipeline_with_never_select_is_greedy_with_offset():
    inst = gen_random_regular(60, 6, seed=7)
    record = run_pipeline(
        ReplaySource(inst),
        60,
        6,
        epsilon=0.5,
        q=0.5,
        threshold=2.0,
        scheme=NeverSelectScheme(),
        master_seed=0,
    )
    base = record.plan.greedy_base
    plain = greedy_color(inst)
    assert record.assignment == [tuple(c + base for c in row) for row in plain]
    assert record.level_colored_counts() == [0] * record.plan.n_levels
    assert record.tail_colored == inst.m


def test_pipeline_determinism_in_master_seed():
    inst = gen_random_regular(80, 8, seed=11)
    kw = dict(epsilon=0.2, q=0.55, threshold=2.0)
    a = run_pipeline(ReplaySource(inst), 80, 8, master_seed=42, **kw)
    b = run_pipeline(ReplaySource(inst), 80, 8, master_seed=42, **kw)
    c = run_pipeline(ReplaySource(inst), 80, 8, master_seed=43, **kw)
    assert a.assignment == b.assignment
    assert a.assignment != c.assignment


def test_run_pipeline_accepts_prebuilt_plan():
    inst = gen_random_regular(50, 4, seed=0)
    plan = plan_levels(50, 4, q=0.5, threshold=2.0)
    record = run_pipeline(ReplaySource(inst), 50, 4, plan=plan, master_seed=0)
    assert record.plan is plan


def test_driver_rejects_budget_violations():
    class Hammer:
        def next_arrival(self, view):
            return OnlineArrival((0,))

    with pytest.raises(DegreeExceeded):
        run_greedy(Hammer(), n_offline=3, delta=1)


def test_on_step_sees_growing_view():
    inst = gen_random_regular(20, 2, seed=1)
    seen = []
    run_greedy(ReplaySource(inst), 20, 2, on_step=lambda t, view: seen.append((t, view.t)))
    assert seen == [(t, t + 1) for t in range(20)]


def test_empty_source_yields_empty_record():
    class Silent:
        def next_arrival(self, view):
            return None

    record = run_pipeline(Silent(), 10, 2, epsilon=0.5, q=0.5, threshold=1.0)
    assert record.m == 0
    assert record.colors_used == 0
    assert record.realized_delta == 1  # floor keeps the ratio defined
