"""Online bipartite edge coloring against adaptive adversaries.

Library + CLI for palette-based online edge coloring: a randomized
partial-coloring level built on a one-winner contention resolution scheme,
a cascade of such levels with a greedy tail, adaptive adversarial arrival
sources, analysis metrics (loads, pair probes, martingale traces), and an
exact micro-scale game solver.
"""

from .adversary import ArrivalSource, GreedyKiller, LoadAttacker, ReplaySource
from .crs import (
    ActiveSet,
    ExpClockScheme,
    MarginalVector,
    NeverSelectScheme,
    SCHEMES,
    Selection,
    UniformScheme,
    exp_clock_select,
    fair_bound,
    get_scheme,
    monte_carlo_marginals,
    selection_prob_exact,
    uniform_marginals_exact,
    uniform_select,
)
from .expectimax import (
    EvalResult,
    FirstFitPolicy,
    LimitExceeded,
    PolicyError,
    SolveResult,
    UniformColorPolicy,
    evaluate_randomized,
    solve_deterministic,
)
from .generators import (
    GenSpec,
    gen_binomial,
    gen_greedy_hard,
    gen_random_regular,
    greedy_hard_required_budget,
    regular_fraction_estimate,
)
from .harness import ConfigError, ExecResult, RunConfig, SweepResult, execute_run, sweep
from .metrics import (
    MartingaleTrace,
    PairProbe,
    RunMetrics,
    SizeMismatch,
    StepLoadReport,
    ValidationFailure,
    bad_pair_probe,
    classify_colors,
    coloring_violations,
    expected_occupied_fraction,
    freedman_bound,
    manifest_payload,
    martingale_trace,
    pair_mass,
    read_loads_csv,
    read_manifest,
    replay_loads,
    run_summary,
    write_loads_csv,
    write_manifest,
    write_trace_csv,
)
from .partial import (
    LevelConfig,
    LevelResult,
    LevelTranscript,
    PaletteState,
    StepOutcome,
    StepRecord,
    epsilon_default,
    init_level,
    process_arrival,
    residual_subgraph,
    run_level,
)
from .pipeline import (
    ALPHA,
    FirstFit,
    InfeasibleParameters,
    LevelPlan,
    RunRecord,
    RunView,
    greedy_color,
    plan_levels,
    run_greedy,
    run_partial,
    run_pipeline,
    shrink_slack,
    stop_threshold_default,
)
from .seeding import derive_seed
from .stream import (
    BudgetTooSmall,
    DegreeExceeded,
    DegreeLedger,
    DuplicateNeighbor,
    HeaderError,
    IdOutOfRange,
    Instance,
    InstanceHeader,
    MalformedRecord,
    OnlineArrival,
    StreamError,
    degree_profile,
    dump_instance,
    iter_edges,
    load_instance,
    parse_instance,
    realized_max_degree,
    save_instance,
    validate_arrival,
    validate_instance,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
