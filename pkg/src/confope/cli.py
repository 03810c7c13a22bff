"""Experiment harness: sweeps, tightness gaps, horizon curves, single-step
bounds, charts, trajectory simulation, and environment inspection.

Population mode is the default for every bound command (it isolates the
partial-identification error); sampled mode needs explicit --sample/--seed.
Sweep points are independent and run on a thread pool capped by the
CONFOPE_THREADS environment variable; output order follows the grid order.
"""

from __future__ import annotations

import functools
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor

import click

from .confounded import inject_confounding, unconfounded_lift
from .dataset import dataset_to_csv, estimate, population_model, simulate
from .envs import ENV_NAMES, load_env, load_env_file, steady_state_transform
from .errors import ConfopeError
from .fqe import confounded_fqe, naive_fqe, nominal_fqe
from .mdp import bellman_apply, mix_q_into_v, zero_values
from .plotting import render_chart
from .results import BoundResult, results_from_csv, results_to_csv
from .robust import robust_value_iteration, single_step_bound, tightness_check
from .sensitivity import SensitivityParams

_METHODS = ("fqe", "robust", "naive", "single-step")
_DEFAULT_GAMMAS = (1.1, 1.5, 2.0, 4.0, 6.0, 10.0)


def _runtime_errors(fn):
    """Map domain and IO failures to exit code 1; click keeps 2 for usage."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except click.ClickException:
            raise
        except (ConfopeError, OSError, ValueError) as exc:
            raise click.ClickException(str(exc)) from exc

    return wrapper


def _thread_count(n_tasks: int) -> int:
    raw = os.environ.get("CONFOPE_THREADS")
    if raw is None:
        cap = os.cpu_count() or 1
    else:
        try:
            cap = int(raw)
        except ValueError:
            raise click.UsageError(f"CONFOPE_THREADS must be an integer, got {raw!r}")
        if cap < 1:
            raise click.UsageError("CONFOPE_THREADS must be >= 1")
    return max(1, min(cap, n_tasks))


def _parallel_map(fn, items):
    workers = _thread_count(len(items))
    if workers == 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _resolve_env(env, env_file):
    if (env is None) == (env_file is None):
        raise click.UsageError("provide exactly one of --env or --env-file")
    if env is not None:
        return load_env(env)
    return load_env_file(env_file)


def _build_model(bench, sample, seed, horizon):
    """Population model by default; sampled mode simulates from the
    unconfounded lift of the benchmark."""
    cm = unconfounded_lift(bench.mdp, bench.pi_b)
    if sample is None:
        if seed is not None:
            raise click.UsageError("--seed requires --sample")
        return population_model(cm), None
    if seed is None:
        raise click.UsageError("--sample requires --seed")
    data = simulate(cm, sample, horizon, seed)
    return estimate(data, bench.mdp.n_states, bench.mdp.n_actions), seed


def _write_out(out: str | None, text: str):
    if out is None or out == "-":
        click.echo(text, nl=False)
    else:
        with open(out, "w") as fh:
            fh.write(text)


def _bound_value(method, model, bench, params, horizon):
    mdp = bench.mdp
    args = (model, mdp.rewards, mdp.discount, mdp.initial_dist, bench.pi_e)
    if method == "fqe":
        return confounded_fqe(*args, params, horizon).expected_lower
    if method == "naive":
        return naive_fqe(*args, params, horizon).expected_lower
    if method == "robust":
        return robust_value_iteration(*args, params, horizon).expected_lower
    if method == "single-step":
        return single_step_bound(*args, params, horizon).expected_lower
    raise click.UsageError(f"unknown method {method!r}")


@click.group()
def main():
    """Certified lower bounds for off-policy evaluation under unobserved
    confounding."""


_env_options = [
    click.option("--env", type=click.Choice(ENV_NAMES), default=None,
                 help="Built-in benchmark environment."),
    click.option("--env-file", type=click.Path(exists=True, dir_okay=False),
                 default=None, help="Custom environment JSON file."),
]


def _with_env(fn):
    for opt in reversed(_env_options):
        fn = opt(fn)
    return fn


@main.command()
@_with_env
@click.option("--method", type=click.Choice(_METHODS), default="fqe")
@click.option("--gamma", "gammas", type=float, multiple=True,
              default=_DEFAULT_GAMMAS, show_default=True)
@click.option("--delta", "deltas", type=float, multiple=True, default=(1.0,),
              show_default=True)
@click.option("--p", type=float, default=0.5, show_default=True)
@click.option("--horizon", type=int, default=None,
              help="Evaluation horizon (defaults to the env's).")
@click.option("--sample", type=int, default=None,
              help="Trajectory count for sampled mode.")
@click.option("--seed", type=int, default=None)
@click.option("--out", type=str, default="-", show_default=True)
@_runtime_errors
def sweep(env, env_file, method, gammas, deltas, p, horizon, sample, seed, out):
    """Bound for every (gamma, delta) grid point; one CSV row each."""
    bench = _resolve_env(env, env_file)
    horizon = horizon if horizon is not None else bench.default_horizon
    model, used_seed = _build_model(bench, sample, seed, horizon)
    mdp = bench.mdp
    nominal = nominal_fqe(
        model, mdp.rewards, mdp.discount, mdp.initial_dist, bench.pi_e, horizon
    ).expected_lower
    points = [(g, d) for d in deltas for g in gammas]

    def run(point):
        g, d = point
        params = SensitivityParams(gamma=g, delta=d, p=p)
        t0 = time.perf_counter()
        bound = _bound_value(method, model, bench, params, horizon)
        elapsed = int(round((time.perf_counter() - t0) * 1000.0))
        return BoundResult(
            env=bench.name, method=method, gamma=g, delta=d, p=p,
            horizon=horizon, bound=bound, nominal_value=nominal,
            behavior_value=bench.behavior_value,
            runtime_ms=0 if model.mode == "population" else elapsed,
            seed=used_seed,
        )

    _write_out(out, results_to_csv(_parallel_map(run, points)))


@main.command()
@_with_env
@click.option("--gamma", "gammas", type=float, multiple=True, default=(2.0, 10.0),
              show_default=True)
@click.option("--delta", "deltas", type=float, multiple=True, default=(2.0, 10.0),
              show_default=True)
@click.option("--p", type=float, default=0.5, show_default=True)
@click.option("--horizon", type=int, default=None)
@click.option("--out", type=str, default="-", show_default=True)
@_runtime_errors
def tightness(env, env_file, gammas, deltas, p, horizon, out):
    """Robust bound plus certified gap to its candidate model.

    Gamma and delta lists are paired elementwise; an extra gap column is
    appended to the result schema."""
    if len(gammas) != len(deltas):
        raise click.UsageError("--gamma and --delta lists must pair up")
    bench = _resolve_env(env, env_file)
    horizon = horizon if horizon is not None else bench.default_horizon
    model, _ = _build_model(bench, None, None, horizon)
    mdp = bench.mdp
    nominal = nominal_fqe(
        model, mdp.rewards, mdp.discount, mdp.initial_dist, bench.pi_e, horizon
    ).expected_lower

    def run(point):
        g, d = point
        params = SensitivityParams(gamma=g, delta=d, p=p)
        res = robust_value_iteration(
            model, mdp.rewards, mdp.discount, mdp.initial_dist, bench.pi_e,
            params, horizon,
        )
        gap = tightness_check(
            model, mdp.rewards, mdp.discount, mdp.initial_dist, bench.pi_e,
            params, horizon, res.candidate, bound=res.expected_lower,
        )
        return BoundResult(
            env=bench.name, method="robust", gamma=g, delta=d, p=p,
            horizon=horizon, bound=res.expected_lower, nominal_value=nominal,
            behavior_value=bench.behavior_value, runtime_ms=0, gap=gap,
        )

    results = _parallel_map(run, list(zip(gammas, deltas)))
    _write_out(out, results_to_csv(results, with_gap=True))


@main.command()
@_with_env
@click.option("--gamma", "gammas", type=float, multiple=True,
              default=(1.5, 2.0, 10.0), show_default=True)
@click.option("--delta", type=float, default=1e6, show_default=True)
@click.option("--p", type=float, default=0.5, show_default=True)
@click.option("--horizon", type=int, default=200, show_default=True)
@click.option("--out", type=str, default="-", show_default=True)
@_runtime_errors
def horizon(env, env_file, gammas, delta, p, horizon, out):
    """Robust bound at every horizon 1..T on the steady-state transform."""
    bench = steady_state_transform(_resolve_env(env, env_file))
    model, _ = _build_model(bench, None, None, horizon)
    mdp = bench.mdp
    ts = tuple(range(1, horizon + 1))
    # nominal and behavior value curves, one Bellman pass each
    nominal_curve = {}
    behavior_curve = {}
    for policy, curve in ((bench.pi_e, nominal_curve), (bench.pi_b, behavior_curve)):
        v = zero_values(mdp.n_states)
        for t in ts:
            v = mix_q_into_v(bellman_apply(mdp, policy, v), policy)
            curve[t] = float(mdp.initial_dist @ v.values)

    def run(g):
        params = SensitivityParams(gamma=g, delta=delta, p=p)
        res = robust_value_iteration(
            model, mdp.rewards, mdp.discount, mdp.initial_dist, bench.pi_e,
            params, horizon, snapshot_horizons=ts,
        )
        return [
            BoundResult(
                env=bench.name, method="robust", gamma=g, delta=delta, p=p,
                horizon=t, bound=res.snapshots[t][0],
                nominal_value=nominal_curve[t],
                behavior_value=behavior_curve[t], runtime_ms=0,
            )
            for t in ts
        ]

    rows = [r for group in _parallel_map(run, list(gammas)) for r in group]
    _write_out(out, results_to_csv(rows))


@main.command("single-step")
@_with_env
@click.option("--gamma", type=float, default=2.0, show_default=True,
              help="Target odds-ratio for the injected behavior confounding.")
@click.option("--delta", type=float, default=2.0, show_default=True,
              help="Target odds-ratio for the injected transition confounding.")
@click.option("--p", type=float, default=0.5, show_default=True)
@click.option("--horizon", type=int, default=None)
@click.option("--out", type=str, default="-", show_default=True)
@_runtime_errors
def single_step(env, env_file, gamma, delta, p, horizon, out):
    """Inject confounding, audit the achieved parameters, and bound the value
    assuming a single confounded step."""
    bench = _resolve_env(env, env_file)
    horizon = horizon if horizon is not None else bench.default_horizon
    injected = inject_confounding(bench.mdp, bench.pi_b, gamma, delta, p)
    model = population_model(injected.model)
    params = SensitivityParams(
        gamma=max(1.0, injected.achieved_gamma),
        delta=max(1.0, injected.achieved_delta),
        p=p,
    )
    mdp = bench.mdp
    nominal = nominal_fqe(
        model, mdp.rewards, mdp.discount, mdp.initial_dist, bench.pi_e, horizon
    ).expected_lower
    res = single_step_bound(
        model, mdp.rewards, mdp.discount, mdp.initial_dist, bench.pi_e,
        params, horizon,
    )
    row = BoundResult(
        env=bench.name, method="single-step",
        gamma=params.gamma, delta=params.delta, p=p, horizon=horizon,
        bound=res.expected_lower, nominal_value=nominal,
        behavior_value=bench.behavior_value, runtime_ms=0,
    )
    _write_out(out, results_to_csv([row]))


@main.command()
@click.argument("csv_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=str, required=True)
@click.option("--title", type=str, default="")
@_runtime_errors
def plot(csv_path, out, title):
    """Render a sweep CSV as a deterministic SVG line chart."""
    with open(csv_path) as fh:
        rows = results_from_csv(fh.read())
    svg = render_chart(rows, title=title)
    with open(out, "w") as fh:
        fh.write(svg)


@main.command("simulate")
@_with_env
@click.option("--sample", type=int, required=True)
@click.option("--seed", type=int, required=True)
@click.option("--gamma", type=float, default=1.0, show_default=True,
              help="Inject behavior confounding before simulating (1 = none).")
@click.option("--delta", type=float, default=1.0, show_default=True)
@click.option("--p", type=float, default=0.5, show_default=True)
@click.option("--horizon", type=int, default=None)
@click.option("--out", type=str, default="-", show_default=True)
@_runtime_errors
def simulate_cmd(env, env_file, sample, seed, gamma, delta, p, horizon, out):
    """Simulate logged trajectories, optionally from a confounded variant."""
    bench = _resolve_env(env, env_file)
    horizon = horizon if horizon is not None else bench.default_horizon
    if gamma == 1.0 and delta == 1.0:
        cm = unconfounded_lift(bench.mdp, bench.pi_b, p)
    else:
        cm = inject_confounding(bench.mdp, bench.pi_b, gamma, delta, p).model
    data = simulate(cm, sample, horizon, seed)
    _write_out(out, dataset_to_csv(data))


@main.command()
@_with_env
@_runtime_errors
def inspect(env, env_file):
    """Print an environment summary as JSON."""
    bench = _resolve_env(env, env_file)
    doc = {
        "name": bench.name,
        "n_states": bench.mdp.n_states,
        "n_actions": bench.mdp.n_actions,
        "discount": bench.mdp.discount,
        "default_horizon": bench.default_horizon,
        "behavior_value": bench.behavior_value,
        "eval_value": bench.eval_value,
    }
    click.echo(json.dumps(doc, indent=2))


if __name__ == "__main__":
    main()
