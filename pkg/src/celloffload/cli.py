"""Command-line entry point: ``celloffload <command> ...``.

Exit codes: 0 success, 2 configuration or input error, 3 a validation
tolerance was exceeded.  Every CSV written with ``--out`` starts with a
``# metadata:`` line carrying the resolved configuration and master seed.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .experiments import SWEEP_AXES, scenario_summary, step_response, sweep, trace_comparison, validation_curves
from .metrics import export_series, write_table
from .mobility import TraceParseError, load_trace
from .scenarios import BUILTIN_SCENARIOS, VALIDATION_GRID, ConfigError, get_scenario, load_config

EXIT_OK, EXIT_CONFIG, EXIT_TOLERANCE = 0, 2, 3

_SCENARIO_FLAGS = ("n", "mu_beta", "sigma", "sigma_mode", "mean_contact_duration", "deadline", "chunk_bytes",
                   "sparsity", "replications", "seed", "n_rounds")


def _add_scenario_flags(p: argparse.ArgumentParser, default_scenario: str | None) -> None:
    src = p.add_mutually_exclusive_group()
    src.add_argument("--scenario", default=default_scenario, help="built-in scenario: " + ", ".join(BUILTIN_SCENARIOS))
    src.add_argument("--config", help="JSON scenario file")
    p.add_argument("--n", type=int)
    p.add_argument("--mu-beta", type=float, help="mean contact rate, contacts/pair/day")
    p.add_argument("--sigma", type=float)
    p.add_argument("--sigma-mode", choices=("relative", "absolute"))
    p.add_argument("--mean-contact-duration", type=float, help="seconds")
    p.add_argument("--deadline", type=float, help="seconds")
    p.add_argument("--chunk-bytes", type=float)
    p.add_argument("--sparsity", type=float)
    p.add_argument("--replications", type=int)
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--n-rounds", type=int)


def _resolve_scenario(args):
    sc = load_config(args.config) if args.config else get_scenario(args.scenario)
    overrides = {k: getattr(args, k) for k in _SCENARIO_FLAGS if getattr(args, k, None) is not None}
    return sc.with_(**overrides) if overrides else sc


def _echo(rows, keys=None) -> None:
    for row in rows:
        items = row.items() if keys is None else ((k, row[k]) for k in keys)
        print("  ".join(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}" for k, v in items))


def cmd_validate(args) -> int:
    settings = VALIDATION_GRID["settings"]
    if args.setting:
        try:
            settings = [tuple(float(x) for x in s.split(":")) for s in args.setting]
        except ValueError:
            raise ConfigError("--setting takes DEADLINE:MU_BETA") from None
        if any(len(s) != 2 for s in settings):
            raise ConfigError("--setting takes DEADLINE:MU_BETA")
    resolved = {
        "n": args.n, "sigma": args.sigma, "settings": [list(s) for s in settings],
        "d_values": args.d or VALIDATION_GRID["d_values"], "replications": args.replications,
        "seed": args.seed, "mean_contact_duration": args.mean_contact_duration,
        "chunk_bytes": args.chunk_bytes, "tolerance": args.tolerance,
    }
    if any(d < 1 or d > args.n for d in resolved["d_values"]):
        raise ConfigError(f"d values must lie in 1..{args.n}")
    rows = validation_curves(n=args.n, sigma=args.sigma, settings=settings, d_values=resolved["d_values"],
                             replications=args.replications, seed=args.seed,
                             mean_contact_duration=args.mean_contact_duration, chunk_bytes=args.chunk_bytes,
                             workers=args.workers)
    limit = args.tolerance * args.n
    for row in rows:
        row["within_tolerance"] = int(row["abs_error"] <= limit)
    _echo(rows)
    if args.out:
        write_table(rows, args.out, {"command": "validate", "config": resolved})
    worst = max(r["abs_error"] for r in rows)
    print(f"worst |analytic - simulated| = {worst:.3f} copies (limit {limit:.3f})")
    return EXIT_OK if worst <= limit else EXIT_TOLERANCE


def cmd_scenario(args) -> int:
    if args.config is None and args.scenario is None:
        raise ConfigError("give a scenario name or --config")
    sc = _resolve_scenario(args)
    summary, hype = scenario_summary(sc, balance_rounds=args.balance_rounds)
    _echo([summary])
    meta = {"command": "scenario", "config": sc.to_dict(), "balance_rounds": args.balance_rounds}
    if args.out:
        write_table([summary], args.out, meta)
    if args.series:
        export_series(hype.results, args.series, "json" if args.series.endswith(".json") else "csv", meta)
    return EXIT_OK


def cmd_sweep(args) -> int:
    sc = _resolve_scenario(args)
    if not args.values:
        raise ConfigError("--values is required")
    rows = sweep(sc, args.axis, args.values, n_rounds=sc.n_rounds)
    _echo(rows)
    if args.out:
        write_table(rows, args.out, {"command": "sweep", "axis": args.axis, "values": args.values,
                                     "config": sc.to_dict()})
    return EXIT_OK


def cmd_controller(args) -> int:
    sc = _resolve_scenario(args)
    if not 0 < args.step_round < sc.n_rounds:
        raise ConfigError("--step-round must lie inside the stream")
    factors = (1.0, 10.0, 0.1)
    res = step_response(sc, mu_after=args.mu_after, step_round=args.step_round, n_rounds=sc.n_rounds,
                        factors=factors)
    print(f"d=s point before the step: {res.target_before}, after: {res.target_after}")
    names = {1.0: "nominal", 10.0: "gains_x10", 0.1: "gains_div10"}
    for f in factors:
        t = res.settling[f]
        print(f"{names[f]}: settling time {'not settled' if t is None else f'{t} rounds'}")
    if args.out:
        rows = [{"round": k, **{names[f]: res.d_series[f][k] for f in factors}} for k in range(sc.n_rounds)]
        meta = {"command": "controller", "mu_after": args.mu_after, "step_round": args.step_round,
                "config": sc.to_dict(), "target_after": res.target_after,
                "settling": {names[f]: res.settling[f] for f in factors}}
        write_table(rows, args.out, meta)
    return EXIT_OK


def cmd_trace(args) -> int:
    try:
        trace = load_trace(args.path)
    except (OSError, TraceParseError) as exc:
        raise ConfigError(f"{args.path}: {exc}") from None
    if trace.n_nodes < 2:
        raise ConfigError(f"{args.path}: need contacts between at least two nodes")
    max_rounds = int(trace.horizon // args.deadline)
    rounds = max_rounds if args.n_rounds is None else args.n_rounds
    if not 1 <= rounds <= max_rounds:
        raise ConfigError(f"trace covers {max_rounds} rounds of {args.deadline} s, asked for {rounds}")
    rows = trace_comparison(trace, args.deadline, rounds, seed=args.seed, chunk_bytes=args.chunk_bytes,
                            reopt_every=args.reopt_every)
    hype = sum(r["hype_D"] for r in rows) / len(rows)
    oracle = sum(r["oracle_D"] for r in rows) / len(rows)
    print(f"{trace.n_nodes} nodes, {len(trace)} contacts, {rounds} rounds")
    print(f"mean D: HYPE {hype:.3f}, oracle {oracle:.3f}")
    if args.out:
        meta = {"command": "trace", "path": args.path, "deadline": args.deadline, "n_rounds": rounds,
                "seed": args.seed, "chunk_bytes": args.chunk_bytes, "reopt_every": args.reopt_every}
        write_table(rows, args.out, meta)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="celloffload",
                                     description="Load, simulation and control experiments for cellular offloading.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="analytic against simulated load curves")
    p.add_argument("--n", type=int, default=VALIDATION_GRID["n"])
    p.add_argument("--sigma", type=float, default=VALIDATION_GRID["sigma"], help="contacts/pair/day")
    p.add_argument("--setting", action="append", metavar="DEADLINE:MU_BETA",
                   help="repeatable; default is the built-in grid")
    p.add_argument("--d", type=int, nargs="+", help="seed counts to evaluate")
    p.add_argument("--replications", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mean-contact-duration", type=float, default=VALIDATION_GRID["mean_contact_duration"])
    p.add_argument("--chunk-bytes", type=float, default=VALIDATION_GRID["chunk_bytes"])
    p.add_argument("--tolerance", type=float, default=0.05, help="allowed error as a fraction of N")
    p.add_argument("--workers", type=int, default=1, help="processes for the replications; output is unchanged")
    p.add_argument("--out")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("scenario", help="optimal, d=s, HYPE and oracle on one scenario")
    p.add_argument("name", nargs="?", help="built-in scenario: " + ", ".join(BUILTIN_SCENARIOS))
    _add_scenario_flags(p, None)
    p.add_argument("--balance-rounds", type=int, help="rounds averaged by the d=s search")
    p.add_argument("--out", help="summary CSV")
    p.add_argument("--series", help="per-round HYPE series (.csv or .json)")
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("sweep", help="HYPE against push-and-track along one axis")
    p.add_argument("axis", choices=SWEEP_AXES)
    p.add_argument("--values", type=float, nargs="+")
    _add_scenario_flags(p, "social_data")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("controller", help="step response of the controller")
    _add_scenario_flags(p, "streaming")
    p.add_argument("--mu-after", type=float, default=40.0, help="contact rate after the step, contacts/pair/day")
    p.add_argument("--step-round", type=int, default=250)
    p.add_argument("--out")
    p.set_defaults(func=cmd_controller)

    p = sub.add_parser("trace", help="HYPE against the oracle on a contact-trace file")
    p.add_argument("path")
    p.add_argument("--deadline", type=float, required=True, help="seconds")
    p.add_argument("--n-rounds", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--chunk-bytes", type=float, default=1e6)
    p.add_argument("--reopt-every", type=int, default=10)
    p.add_argument("--out")
    p.set_defaults(func=cmd_trace)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "scenario" and args.name is not None:
        if args.config is not None:
            print("error: give either a scenario name or --config", file=sys.stderr)
            return EXIT_CONFIG
        args.scenario = args.name
    if args.command == "sweep" and args.axis == "n_users" and args.values:
        args.values = [int(v) for v in args.values]
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
