"""Experiment drivers shared by the command line and the acceptance tests.

Each driver returns plain rows (lists of dicts) so results can be printed,
written as CSV or checked against thresholds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analytic import ChainParams, InjectionStrategy, expected_load, optimal_seed_count
from .baselines import (
    StreamResult,
    TargetCurve,
    find_balanced_seed_count,
    run_fixed_stream,
    run_hype_stream,
    run_oracle_reoptimizer,
    run_push_and_track_stream,
)
from .control import ziegler_nichols
from .metrics import accumulated_comms, jain_fairness, offload_fraction, signaling_per_user
from .mobility import SECONDS_PER_DAY, ContactTrace, DurationDistribution, RateDistribution, concat_traces, generate_trace, sample_graph
from .scenarios import VALIDATION_GRID, ScenarioConfig
from .sim import RoundConfig, empirical_load_curve

__all__ = [
    "validation_curves",
    "scenario_summary",
    "settling_time",
    "StepResponse",
    "step_response",
    "sweep",
    "trace_comparison",
    "SWEEP_AXES",
]

PT_CURVES = ("sqrt", "linear", "quadratic")
SWEEP_AXES = ("sigma", "sparsity", "n_users", "deadline")


def validation_curves(n: int = VALIDATION_GRID["n"], sigma: float = VALIDATION_GRID["sigma"],
                      settings=VALIDATION_GRID["settings"], d_values=VALIDATION_GRID["d_values"],
                      replications: int = 1000, seed: int = 0,
                      mean_contact_duration: float = VALIDATION_GRID["mean_contact_duration"],
                      chunk_bytes: float = VALIDATION_GRID["chunk_bytes"], workers: int = 1) -> list[dict]:
    """Analytic against simulated ``D(d)``.

    ``settings`` holds ``(deadline s, mu_beta contacts/pair/day)`` pairs and
    ``sigma`` is in contacts/pair/day.  Each setting gets its own contact
    graph; all ``d`` of one setting share replication seeds.  ``workers``
    only changes the speed, never the numbers.
    """
    rows = []
    children = np.random.SeedSequence(seed).spawn(len(settings))
    durations = DurationDistribution(mean_contact_duration)
    for (deadline, mu_day), child in zip(settings, children):
        graph_seed, sim_seed = (int(c.generate_state(1)[0]) for c in child.spawn(2))
        dist = RateDistribution(mu_day / SECONDS_PER_DAY, sigma / SECONDS_PER_DAY)
        graph = sample_graph(n, dist, rng_seed=graph_seed)
        params = ChainParams(n, mu_day / SECONDS_PER_DAY, deadline)
        base = RoundConfig(deadline=deadline, seed_count=1, chunk_bytes=chunk_bytes)
        points = empirical_load_curve(graph, durations, base, d_values, replications, master_seed=sim_seed,
                                      workers=workers)
        for pt in points:
            analytic = expected_load(params, InjectionStrategy.prefix(pt.d)).expected_load
            rows.append({
                "deadline": float(deadline), "mu_beta": float(mu_day), "d": pt.d,
                "analytic_D": analytic, "sim_D": pt.mean_load, "sim_se": pt.load_se,
                "abs_error": abs(analytic - pt.mean_load),
            })
    return rows


def scenario_summary(sc: ScenarioConfig, n_rounds: int | None = None, balance_rounds: int | None = None,
                     trace: ContactTrace | None = None) -> tuple[dict, StreamResult]:
    """Optimal strategy, ``d = s`` benchmark, HYPE and the oracle on one trace.

    ``balance_rounds`` limits how many rounds the ``d = s`` search averages
    over (all rounds by default).  Returns the summary row and the HYPE
    stream.
    """
    rounds = sc.n_rounds if n_rounds is None else n_rounds
    trace = sc.build_trace(rounds) if trace is None else trace
    cfg = sc.round_config()
    params = sc.chain_params()
    d_opt = optimal_seed_count(params)
    analytic = expected_load(params, InjectionStrategy.prefix(d_opt)).expected_load

    optimal = run_fixed_stream(trace, cfg, d_opt, rounds)
    d_bal = find_balanced_seed_count(trace, cfg, rounds if balance_rounds is None else balance_rounds)
    balanced = run_fixed_stream(trace, cfg, d_bal, rounds)
    hype = run_hype_stream(trace, cfg, ziegler_nichols(sc.n), rounds)
    oracle = run_oracle_reoptimizer(trace, cfg, rounds)
    n = sc.n
    summary = {
        "scenario": sc.name,
        "n": n,
        "rounds": rounds,
        "analytic_d_opt": d_opt,
        "analytic_D": analytic,
        "optimal_D": optimal.mean_load(),
        "balanced_d": d_bal,
        "balanced_D": balanced.mean_load(),
        "hype_D": hype.mean_load(),
        "hype_mean_d": float(np.mean(hype.d_series)),
        "oracle_D": oracle.mean_load(),
        "optimal_offload": offload_fraction(optimal.results, n),
        "hype_offload": offload_fraction(hype.results, n),
        "hype_signals_per_user": signaling_per_user(hype.results, n),
    }
    return summary, hype


def settling_time(d_series, target: int, start: int, tol: int = 2, hold: int = 50) -> int | None:
    """Rounds after ``start`` until ``|d - target| <= tol`` holds for ``hold`` rounds in a row."""
    ok = np.abs(np.asarray(d_series) - target) <= tol
    run = 0
    first = None
    for r in range(len(ok) - 1, start - 1, -1):
        run = run + 1 if ok[r] else 0
        if run >= hold:
            first = r
    return None if first is None else first - start


@dataclass
class StepResponse:
    target_before: int
    target_after: int
    step_round: int
    d_series: dict
    settling: dict


def step_response(sc: ScenarioConfig, mu_after: float = 40.0, step_round: int = 250, n_rounds: int = 500,
                  factors=(1.0, 10.0, 0.1), tol: int = 2, hold: int = 50) -> StepResponse:
    """Contact rate jumps from ``sc.mu_beta`` to ``mu_after`` at ``step_round``.

    The same pairs keep their relative rates; every pair rate is multiplied
    by ``mu_after / mu_beta``.  The settling target after the step is the
    ``d = s`` point of the post-step trace, which is where the loop steers.
    """
    graph = sc.build_graph()
    durations = sc.duration_distribution()
    before_seed, after_seed = np.random.SeedSequence(sc.seed_streams()[1]).spawn(2)
    before = generate_trace(graph, durations, step_round * sc.deadline, rng_seed=before_seed)
    after = generate_trace(graph.scaled(mu_after / sc.mu_beta), durations, (n_rounds - step_round) * sc.deadline,
                           rng_seed=after_seed)
    trace = concat_traces([before, after])
    cfg = sc.round_config()
    target_before = find_balanced_seed_count(before, cfg, step_round)
    target_after = find_balanced_seed_count(after, cfg, n_rounds - step_round)
    series, settle = {}, {}
    nominal = ziegler_nichols(sc.n)
    for f in factors:
        hype = run_hype_stream(trace, cfg, nominal.scaled(f), n_rounds)
        series[f] = list(hype.d_series)
        settle[f] = settling_time(hype.d_series, target_after, step_round, tol, hold)
    return StepResponse(target_before, target_after, step_round, series, settle)


def _axis_change(sc: ScenarioConfig, axis: str, value) -> ScenarioConfig:
    if axis == "sigma":
        return sc.with_(sigma=float(value))
    if axis == "sparsity":
        return sc.with_(sparsity=float(value))
    if axis == "n_users":
        return sc.with_(n=int(value))
    if axis == "deadline":
        return sc.with_(deadline=float(value))
    raise ValueError(f"unknown sweep axis {axis!r}; choose from {', '.join(SWEEP_AXES)}")


def sweep(sc: ScenarioConfig, axis: str, values, n_rounds: int | None = None, curves=PT_CURVES) -> list[dict]:
    """HYPE (uniform and greedy seeding) against push-and-track along one axis."""
    rows = []
    for value in values:
        point = _axis_change(sc, axis, value)
        rounds = point.n_rounds if n_rounds is None else n_rounds
        graph = point.build_graph()
        trace = point.build_trace(rounds, graph=graph)
        cfg = point.round_config()
        ctrl = ziegler_nichols(point.n)
        uniform = run_hype_stream(trace, cfg, ctrl, rounds)
        greedy = run_hype_stream(trace, cfg.with_(seed_selection="greedy_contact_rate"), ctrl, rounds,
                                 node_weights=graph.node_rates())
        row = {
            "axis": axis, "value": value, "n": point.n,
            "hype_D": uniform.mean_load(),
            "hype_offload": offload_fraction(uniform.results, point.n),
            "hype_signals_per_round": float(uniform.signals.mean()),
            "jfi_uniform": jain_fairness(accumulated_comms(uniform.results)),
            "greedy_D": greedy.mean_load(),
            "jfi_greedy": jain_fairness(accumulated_comms(greedy.results)),
        }
        for kind in curves:
            pt = run_push_and_track_stream(trace, cfg, TargetCurve(kind), rounds)
            row[f"pt_{kind}_D"] = pt.mean_load()
            row[f"pt_{kind}_signals_per_round"] = float(pt.signals.mean())
        rows.append(row)
    return rows


def trace_comparison(trace: ContactTrace, deadline: float, n_rounds: int | None = None, seed: int = 0,
                     chunk_bytes: float = 1e6, reopt_every: int = 10) -> list[dict]:
    """Per-round HYPE and oracle loads on a recorded trace."""
    rounds = int(math.floor(trace.horizon / deadline + 1e-9)) if n_rounds is None else n_rounds
    cfg = RoundConfig(deadline=deadline, seed_count=1, chunk_bytes=chunk_bytes, rng_seed=seed)
    hype = run_hype_stream(trace, cfg, ziegler_nichols(trace.n_nodes), rounds)
    oracle = run_oracle_reoptimizer(trace, cfg, rounds, reopt_every)
    rows = []
    for k in range(rounds):
        h, o = hype.results[k], oracle.results[k]
        rows.append({"round": k, "hype_d": hype.d_series[k], "hype_s": h.signals, "hype_D": h.cellular_copies,
                     "oracle_d": oracle.d_series[k], "oracle_D": o.cellular_copies})
    return rows
