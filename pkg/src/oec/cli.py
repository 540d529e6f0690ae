"""Command line entry point.

Subcommands: gen (instances), validate (structural checks), run (one
coloring run with manifest/metrics export and optional figures), sweep
(delta x seed grids with an aggregate CSV), crs-check (selection-scheme
marginals vs closed forms), expectimax (micro game values).

Exit codes: 0 success, 2 configuration error, 3 validation failure,
4 run error.  The OEC_SEED environment variable supplies the default
master seed; a --config file holds flag defaults as key=value lines, with
explicit flags winning.
"""
from __future__ import annotations

import sys
from pathlib import Path

import click
import numpy as np

from . import expectimax as em
from .crs import (
    SCHEMES,
    fair_bound,
    monte_carlo_marginals,
    selection_prob_exact,
    uniform_marginals_exact,
)
from .generators import GenSpec
from .harness import ConfigError, RunConfig, execute_run, sweep as run_sweep
from .metrics import ValidationFailure, martingale_trace
from .pipeline import InfeasibleParameters
from .seeding import derive_seed
from .stream import (
    StreamError,
    degree_profile,
    load_instance,
    realized_max_degree,
    save_instance,
    validate_instance,
)

EXIT_CONFIG = 2
EXIT_VALIDATION = 3
EXIT_RUN = 4


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _config_file_option(fn):
    return click.option(
        "--config",
        "config_file",
        type=click.Path(exists=True, dir_okay=False),
        is_eager=True,
        expose_value=False,
        callback=_load_config_file,
        help="key=value file supplying defaults; explicit flags win.",
    )(fn)


def _load_config_file(ctx, param, value):
    if not value:
        return None
    data = {}
    for line_no, raw in enumerate(Path(value).read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise click.BadParameter(f"line {line_no}: expected key=value, got {raw!r}")
        key, val = line.split("=", 1)
        data[key.strip().replace("-", "_")] = val.strip()
    ctx.meta["config_file"] = data
    return value


def _merge_config_file(ctx, values: dict) -> dict:
    """Overlay file-provided defaults onto params the user did not set."""
    data = ctx.meta.get("config_file")
    if not data:
        return values
    params = {p.name: p for p in ctx.command.params}
    unknown = set(data) - set(values)
    if unknown:
        raise click.UsageError(f"unknown config file keys: {', '.join(sorted(unknown))}")
    out = dict(values)
    for key, raw in data.items():
        source = ctx.get_parameter_source(key)
        if source is not None and source.name != "DEFAULT":
            continue  # explicit flag or env var wins
        out[key] = params[key].type.convert(raw, params[key], ctx)
    return out


_seed_option = click.option(
    "--seed",
    "master_seed",
    type=int,
    default=0,
    show_default=True,
    envvar="OEC_SEED",
    show_envvar=True,
    help="Master seed; every internal stream derives from it.",
)


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
def main():
    """Online bipartite edge coloring experiments."""


# ---------------------------------------------------------------------------
# gen


@main.command()
@click.option(
    "--kind",
    type=click.Choice(["regular", "binomial", "greedy-hard"]),
    default="regular",
    show_default=True,
)
@click.option("--n", "n_offline", type=int, required=True, help="Offline nodes (budget for greedy-hard).")
@click.option("--delta", type=int, required=True, help="Degree bound.")
@click.option("--n-online", type=int, default=None, help="Online nodes (binomial).")
@click.option("--edge-prob", type=float, default=None, help="Edge probability (binomial).")
@_seed_option
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@_config_file_option
@click.pass_context
def gen(ctx, kind, n_offline, delta, n_online, edge_prob, master_seed, out):
    """Generate an instance file."""
    vals = _merge_config_file(ctx, dict(
        kind=kind, n_offline=n_offline, delta=delta, n_online=n_online,
        edge_prob=edge_prob, master_seed=master_seed, out=out,
    ))
    try:
        spec = GenSpec(
            kind=vals["kind"],
            n_offline=vals["n_offline"],
            delta=vals["delta"],
            seed=derive_seed(vals["master_seed"], "gen"),
            n_online=vals["n_online"],
            edge_prob=vals["edge_prob"],
        )
        instance = spec.build()
    except (ValueError, StreamError) as exc:
        _fail(EXIT_CONFIG, str(exc))
    save_instance(instance, vals["out"])
    click.echo(
        f"wrote {vals['out']}: n_offline={instance.header.n_offline} "
        f"delta={instance.header.delta} arrivals={len(instance.arrivals)} "
        f"edges={instance.m}"
    )


# ---------------------------------------------------------------------------
# validate


@main.command()
@click.argument("instance", type=click.Path(exists=True, dir_okay=False))
@click.option("--permissive", is_flag=True, help="Drop offending edges instead of failing.")
def validate(instance, permissive):
    """Check an instance file against its declared bounds."""
    try:
        inst = load_instance(instance)
    except StreamError as exc:
        _fail(EXIT_VALIDATION, f"{instance}: {exc}")
    try:
        validate_instance(inst, permissive=permissive)
    except StreamError as exc:
        _fail(EXIT_VALIDATION, f"{instance}: {exc}")
    profile = degree_profile(validate_instance(inst, permissive=True))
    top = realized_max_degree(inst)
    click.echo(
        f"{instance}: ok n_offline={inst.header.n_offline} delta={inst.header.delta} "
        f"arrivals={len(inst.arrivals)} edges={inst.m} realized_max_degree={top}"
    )
    saturated = profile.get(inst.header.delta, 0)
    click.echo(f"offline nodes at full degree: {saturated}")


# ---------------------------------------------------------------------------
# run


def _run_options(fn):
    for opt in reversed(
        [
            click.option("--algo", type=click.Choice(["greedy", "partial", "pipeline"]), default="pipeline", show_default=True),
            click.option("--instance", "instance_path", type=click.Path(exists=True, dir_okay=False), default=None, help="Replay this instance file."),
            click.option("--source", type=click.Choice(["file", "regular", "binomial", "greedy-hard", "load-attacker", "greedy-killer"]), default=None, help="Arrival source when no instance file is given."),
            click.option("--n", "n_offline", type=int, default=None, help="Offline nodes."),
            click.option("--delta", type=int, default=None, help="Degree bound."),
            click.option("--n-online", type=int, default=None),
            click.option("--edge-prob", type=float, default=None),
            click.option("--color-frac", type=float, default=None, help="Attacked color fraction (load-attacker)."),
            click.option("--arrivals-budget", type=int, default=None, help="Arrival budget (load-attacker)."),
            click.option("--epsilon", type=float, default=None, help="Palette slack override."),
            click.option("--q", type=float, default=None, help="Level shrink factor override."),
            click.option("--threshold", type=float, default=None, help="Cascade stop threshold override."),
            click.option("--crs", type=click.Choice(sorted(SCHEMES)), default="exp-clock", show_default=True),
            click.option("--manifest", "manifest_path", type=click.Path(dir_okay=False), default=None, help="Write the run manifest JSON here."),
            click.option("--metrics", "loads_path", type=click.Path(dir_okay=False), default=None, help="Write the per-arrival loads CSV here."),
            click.option("--trace-pairs", type=int, default=0, show_default=True, help="Sample this many (U, C) pairs and trace them."),
            click.option("--report", "report_dir", type=click.Path(file_okay=False), default=None, help="Render figures into this directory."),
        ]
    ):
        fn = opt(fn)
    return fn


@main.command()
@_run_options
@_seed_option
@_config_file_option
@click.pass_context
def run(ctx, **kwargs):
    """Run one coloring experiment."""
    vals = _merge_config_file(ctx, kwargs)
    source = vals["source"]
    if vals["instance_path"] and source in (None, "file"):
        source = "file"
    elif vals["instance_path"]:
        _fail(EXIT_CONFIG, "give either --instance or --source, not both")
    elif source is None:
        source = "regular"
    config = RunConfig(
        algo=vals["algo"],
        source=source,
        instance_path=vals["instance_path"],
        n_offline=vals["n_offline"],
        delta=vals["delta"],
        n_online=vals["n_online"],
        edge_prob=vals["edge_prob"],
        color_frac=vals["color_frac"],
        arrivals_budget=vals["arrivals_budget"],
        epsilon=vals["epsilon"],
        q=vals["q"],
        threshold=vals["threshold"],
        crs=vals["crs"],
        master_seed=vals["master_seed"],
        manifest_path=vals["manifest_path"],
        loads_path=vals["loads_path"],
        trace_pairs=vals["trace_pairs"],
    )
    try:
        result = execute_run(config)
    except (ConfigError, InfeasibleParameters) as exc:
        _fail(EXIT_CONFIG, str(exc))
    except (StreamError, ValidationFailure, FileNotFoundError) as exc:
        _fail(EXIT_VALIDATION, str(exc))
    except Exception as exc:
        _fail(EXIT_RUN, f"{type(exc).__name__}: {exc}")
    s = result.summary
    click.echo(
        f"algo={s.algo} arrivals={s.n_online} edges={s.m} colored={s.colored} "
        f"colors={s.colors_used} realized_delta={s.realized_delta} ratio={s.ratio:.4f}"
    )
    if vals["report_dir"]:
        from .figures import render_run_figures

        transcript = result.record.transcripts[0] if result.record.transcripts else None
        traces = []
        if transcript is not None and result.manifest.get("traces"):
            for meta in result.manifest["traces"]:
                traces.append(martingale_trace(transcript, meta["U"], meta["C"]))
        written = render_run_figures(s, transcript, traces, vals["report_dir"])
        for path in written:
            click.echo(f"figure: {path}")


# ---------------------------------------------------------------------------
# sweep


@main.command("sweep")
@_run_options
@click.option("--delta-list", default="64,128,256", show_default=True, help="Comma-separated degree bounds.")
@click.option("--seeds", "seed_count", type=int, default=20, show_default=True)
@click.option("--threshold-frac", type=float, default=None, help="Per-delta stop threshold = frac * delta.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@click.option("--jobs", type=int, default=1, show_default=True)
@_seed_option
@_config_file_option
@click.pass_context
def sweep_cmd(ctx, **kwargs):
    """Run a delta x seed grid and aggregate the results."""
    vals = _merge_config_file(ctx, kwargs)
    try:
        deltas = [int(tok) for tok in str(vals["delta_list"]).split(",") if tok.strip()]
    except ValueError:
        _fail(EXIT_CONFIG, f"bad --delta-list {vals['delta_list']!r}")
    source = vals["source"] or ("file" if vals["instance_path"] else "regular")
    template = RunConfig(
        algo=vals["algo"],
        source=source,
        instance_path=vals["instance_path"],
        n_offline=vals["n_offline"],
        delta=deltas[0] if deltas else None,
        n_online=vals["n_online"],
        edge_prob=vals["edge_prob"],
        color_frac=vals["color_frac"],
        arrivals_budget=vals["arrivals_budget"],
        epsilon=vals["epsilon"],
        q=vals["q"],
        threshold=vals["threshold"],
        crs=vals["crs"],
        master_seed=vals["master_seed"],
    )
    try:
        result = run_sweep(
            template,
            deltas,
            vals["seed_count"],
            out_dir=vals["out_dir"],
            jobs=vals["jobs"],
            threshold_frac=vals["threshold_frac"],
        )
    except (ConfigError, InfeasibleParameters) as exc:
        _fail(EXIT_CONFIG, str(exc))
    except Exception as exc:
        _fail(EXIT_RUN, f"{type(exc).__name__}: {exc}")
    for row in result.rows:
        click.echo(
            f"delta={row['delta']} runs={row['runs']} "
            f"ratio={row['ratio_mean']:.4f}+-{row['ratio_std']:.4f} "
            f"colored_fraction={row['colored_fraction_mean']:.4f}"
        )
    click.echo(f"aggregate: {result.aggregate_path}")
    if vals["report_dir"]:
        from .figures import render_sweep_figures

        for path in render_sweep_figures(result.rows, vals["report_dir"]):
            click.echo(f"figure: {path}")
    if result.failures:
        for name, err in result.failures:
            click.echo(f"cell {name} failed: {err}", err=True)
        sys.exit(EXIT_RUN)


# ---------------------------------------------------------------------------
# crs-check


@main.command("crs-check")
@click.option("--scheme", type=click.Choice(sorted(SCHEMES)), default="exp-clock", show_default=True)
@click.option("--x", "vector", default=None, help="Comma-separated marginals, e.g. 0.2,0.5,0.8.")
@click.option("--random", "n_random", type=int, default=0, help="Check this many random vectors instead.")
@click.option("--dim", type=int, default=6, show_default=True, help="Dimension of random vectors.")
@click.option("--trials", type=int, default=100_000, show_default=True)
@_seed_option
def crs_check(scheme, vector, n_random, dim, trials, master_seed):
    """Compare a scheme's empirical marginals against closed forms."""
    vectors: list[np.ndarray] = []
    if vector is not None:
        try:
            vectors.append(np.array([float(tok) for tok in vector.split(",")]))
        except ValueError:
            _fail(EXIT_CONFIG, f"bad --x {vector!r}")
    if n_random > 0:
        rng = np.random.Generator(np.random.PCG64(derive_seed(master_seed, "mc:vectors")))
        for _ in range(n_random):
            vectors.append(rng.random(dim))
    if not vectors:
        vectors.append(np.array([0.2, 0.5, 0.8]))

    worst = 0.0
    for k, x in enumerate(vectors):
        if not ((x >= 0) & (x <= 1)).all():
            _fail(EXIT_CONFIG, f"marginals must lie in [0, 1], got {x}")
        exact = (
            selection_prob_exact(x)
            if scheme == "exp-clock"
            else uniform_marginals_exact(x)
        )
        fair = fair_bound(x)
        emp, se = monte_carlo_marginals(
            x, scheme, trials, derive_seed(master_seed, f"mc:{k}")
        )
        dev = np.abs(emp - exact) / np.where(se > 0, se, 1.0)
        worst = max(worst, float(dev.max()))
        click.echo(f"vector {k}: x = {np.array2string(x, precision=4)}")
        for i in range(x.size):
            click.echo(
                f"  [{i}] exact={exact[i]:.6f} mc={emp[i]:.6f} se={se[i]:.6f} "
                f"fair={fair[i]:.6f}"
            )
        if scheme == "exp-clock":
            floor = (1.0 - float(x.max())) * fair
            if (exact + 1e-12 < floor).any():
                _fail(EXIT_RUN, "certified lower bound violated (scheme bug)")
    click.echo(f"max |mc - exact| deviation: {worst:.2f} standard errors")
    if worst > 5.0:
        _fail(EXIT_RUN, "Monte Carlo disagrees with the closed form beyond 5 SE")


# ---------------------------------------------------------------------------
# expectimax


@main.command("expectimax")
@click.option("--n-off", type=int, required=True)
@click.option("--delta", type=int, required=True)
@click.option("--arrivals", type=int, required=True)
@click.option("--color-cap", type=int, default=None, help="Defaults to 2*delta - 1.")
@click.option("--policy", type=click.Choice(sorted(em.POLICIES)), default=None, help="Evaluate this policy instead of solving the minimax.")
def expectimax_cmd(n_off, delta, arrivals, color_cap, policy):
    """Solve or evaluate the micro coloring game."""
    cap = color_cap if color_cap is not None else 2 * delta - 1
    try:
        if policy is None:
            result = em.solve_deterministic(n_off, delta, arrivals, cap)
            kind = "minimax"
        else:
            result = em.evaluate_randomized(
                em.POLICIES[policy](), n_off, delta, arrivals, cap
            )
            kind = f"policy {policy}"
    except em.LimitExceeded as exc:
        _fail(EXIT_CONFIG, str(exc))
    except em.PolicyError as exc:
        _fail(EXIT_RUN, str(exc))
    if not result.feasible:
        click.echo(f"{kind}: infeasible under color cap {cap}")
        return
    value = result.value
    click.echo(
        f"{kind} value: {value:.6g} (n_off={n_off} delta={delta} "
        f"arrivals={arrivals} color_cap={cap})"
    )
    for step, entry in enumerate(result.trace):
        move, action = entry[0], entry[1]
        suffix = f" (p={entry[2]:.4g})" if len(entry) > 2 else ""
        click.echo(
            f"  arrival {step}: {em.format_move(move)} -> "
            f"colors {em.format_action(action)}{suffix}"
        )


if __name__ == "__main__":
    main()
