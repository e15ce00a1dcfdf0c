"""Multi-round delivery streams and the strategies HYPE is compared with.

A stream plays consecutive rounds on the windows ``[k T_c, (k + 1) T_c)`` of
one long contact trace.  Round ``k`` draws its randomness from the ``k``-th
child of the master seed, so different strategies see the same windows and
the same random numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .control import ControllerConfig, ControllerState, step
from .mobility import ContactTrace
from .sim import DisseminationRound, RoundConfig, RoundResult, arrival_times, run_round

__all__ = [
    "TargetCurve",
    "StreamResult",
    "round_seeds",
    "run_push_and_track_round",
    "run_push_and_track_stream",
    "run_fixed_stream",
    "run_hype_stream",
    "run_oracle_reoptimizer",
    "find_balanced_seed_count",
    "load_by_seed_count",
]

_CURVES: dict[str, Callable[[float], float]] = {
    "sqrt": math.sqrt,
    "linear": lambda x: x,
    "quadratic": lambda x: x * x,
}


@dataclass(frozen=True)
class TargetCurve:
    """Fraction of nodes that should hold the chunk at relative time ``x``."""

    kind: str
    fn: Callable[[float], float] | None = None

    def __post_init__(self):
        if self.fn is None and self.kind not in _CURVES:
            raise ValueError(f"unknown target curve {self.kind!r}")

    def __call__(self, x: float) -> float:
        f = self.fn if self.fn is not None else _CURVES[self.kind]
        return min(1.0, max(0.0, f(min(1.0, max(0.0, x)))))

    def target(self, n: int, x: float) -> int:
        # guard against 100 * 0.07 = 7.000000000000001 style round-up
        return int(math.ceil(n * self(x) - 1e-9))


@dataclass
class StreamResult:
    results: list[RoundResult]
    d_series: list[int]
    history: list = field(default_factory=list)

    @property
    def loads(self) -> np.ndarray:
        return np.array([r.cellular_copies for r in self.results])

    @property
    def signals(self) -> np.ndarray:
        return np.array([r.signals for r in self.results])

    def mean_load(self, skip: int = 0) -> float:
        return float(self.loads[skip:].mean())


def round_seeds(master_seed, n_rounds: int) -> list[int]:
    children = np.random.SeedSequence(master_seed).spawn(n_rounds)
    return [int(c.generate_state(1)[0]) for c in children]


def _check_stream(trace: ContactTrace, deadline: float, n_rounds: int) -> None:
    if n_rounds < 1:
        raise ValueError("n_rounds must be >= 1")
    if n_rounds * deadline > trace.horizon * (1 + 1e-12):
        raise ValueError(f"trace of {trace.horizon} s too short for {n_rounds} rounds of {deadline} s")


def run_push_and_track_round(trace_window: ContactTrace, config: RoundConfig, curve: TargetCurve,
                             check_interval: float | None = None) -> RoundResult:
    """One round of push-and-track delivery.

    Starts with ``ceil(N f(eps))`` random seeds, re-injects the deficit to
    random uninfected nodes at every check ``k * eps`` (default
    ``eps = T_c / 100``) and fills the rest at the deadline.  Every node that
    gets the chunk before the deadline acknowledges it.
    """
    deadline = config.deadline
    if trace_window.horizon < deadline:
        raise ValueError(f"trace window ({trace_window.horizon} s) shorter than the deadline ({deadline} s)")
    eps = deadline / 100 if check_interval is None else check_interval
    if not eps > 0:
        raise ValueError("check_interval must be positive")
    n = trace_window.n_nodes
    rng = np.random.default_rng(config.rng_seed)
    engine = DisseminationRound(trace_window, deadline, config.transfer_time, config.relay_in_progress)

    def top_up(target: int) -> None:
        deficit = min(target, n) - engine.infected
        if deficit > 0:
            pool = np.flatnonzero(engine.status < -1)
            for node in rng.choice(pool, size=deficit, replace=False):
                engine.inject(int(node), tag=0)

    initial = max(1, curve.target(n, eps / deadline))
    top_up(initial)
    k = 1
    while k * eps < deadline:
        t = k * eps
        engine.run_until(t)
        top_up(curve.target(n, t / deadline))
        k += 1
    engine.run_until(deadline)

    infected = engine.infected
    comms = engine.comms.copy()
    holders = engine.status != -2
    comms[~holders] += 1
    comms[holders] += 1  # acknowledgement
    return RoundResult(
        seed_count=initial,
        cellular_copies=engine.cellular + (n - infected),
        signals=infected,
        infected_at_deadline=infected,
        per_node_comms=comms,
        opportunistic_transfers=engine.transfers,
        single_id=0,
    )


def run_push_and_track_stream(trace: ContactTrace, config: RoundConfig, curve: TargetCurve, n_rounds: int,
                              check_interval: float | None = None) -> StreamResult:
    _check_stream(trace, config.deadline, n_rounds)
    results = []
    for k, seed in enumerate(round_seeds(config.rng_seed, n_rounds)):
        window = trace.window(k * config.deadline, config.deadline)
        results.append(run_push_and_track_round(window, config.with_(rng_seed=seed), curve, check_interval))
    return StreamResult(results, [r.seed_count for r in results])


def run_fixed_stream(trace: ContactTrace, config: RoundConfig, d: int, n_rounds: int,
                     node_weights=None) -> StreamResult:
    """Every round seeds the same number ``d`` of copies."""
    _check_stream(trace, config.deadline, n_rounds)
    results = []
    for k, seed in enumerate(round_seeds(config.rng_seed, n_rounds)):
        window = trace.window(k * config.deadline, config.deadline)
        results.append(run_round(window, config.with_(seed_count=d, rng_seed=seed), node_weights))
    return StreamResult(results, [d] * n_rounds)


def run_hype_stream(trace: ContactTrace, config: RoundConfig, controller: ControllerConfig, n_rounds: int,
                    node_weights=None, state: ControllerState | None = None) -> StreamResult:
    """Adaptive delivery: the PI controller sets ``d`` before every round."""
    _check_stream(trace, config.deadline, n_rounds)
    state = ControllerState.initial(controller) if state is None else state
    results, d_series = [], []
    for k, seed in enumerate(round_seeds(config.rng_seed, n_rounds)):
        window = trace.window(k * config.deadline, config.deadline)
        d = state.d_current
        res = run_round(window, config.with_(seed_count=d, rng_seed=seed), node_weights)
        results.append(res)
        d_series.append(d)
        step(state, controller, res.signals)
    return StreamResult(results, d_series, state.history)


def load_by_seed_count(window: ContactTrace, config: RoundConfig, max_d: int | None = None) -> np.ndarray:
    """Cellular load of one round for every seed count ``d = 1..max_d``.

    Uses the seed permutation :func:`run_round` would draw from
    ``config.rng_seed``, so entry ``d - 1`` equals the ``D`` that round
    would report with ``d`` seeds.
    """
    n = window.n_nodes
    k = n if max_d is None else min(int(max_d), n)
    order = np.random.default_rng(config.rng_seed).permutation(n)[:k]
    arr = arrival_times(window, config.deadline, config.transfer_time, order, config.relay_in_progress)
    reached = np.minimum.accumulate(arr, axis=0) <= config.deadline
    infected = reached.sum(axis=1)
    return np.arange(1, k + 1) + n - infected


def _best_block_d(windows, configs, n: int, first_guess: int | None = None) -> int:
    """Seed count with the smallest summed load over a block of rounds.

    ``D(d) >= d`` in every round, so once the best block total is at most
    ``B k`` no ``d > k`` can win and larger ``d`` need not be replayed.
    Sources are added in chunks; earlier arrival rows are kept.
    """
    orders = [np.random.default_rng(c.rng_seed).permutation(n) for c in configs]
    reach = [np.full(n, np.inf) for _ in windows]
    infected = [[] for _ in windows]
    # one replay costs about the same for few or many sources, so start wide
    done, k = 0, min(n, first_guess or max(64, n // 4))
    while True:
        for i, (w, c) in enumerate(zip(windows, configs)):
            arr = arrival_times(w, c.deadline, c.transfer_time, orders[i][done:k], c.relay_in_progress)
            running = np.minimum.accumulate(np.vstack([reach[i], arr]), axis=0)[1:]
            reach[i] = running[-1]
            infected[i].extend((running <= c.deadline).sum(axis=1).tolist())
        done = k
        d = np.arange(1, k + 1)
        total = sum(d + n - np.asarray(inf) for inf in infected)
        best = int(np.argmin(total))
        if k == n or total[best] <= len(windows) * k:
            return best + 1
        k = min(n, 2 * k)


def run_oracle_reoptimizer(trace: ContactTrace, config: RoundConfig, n_rounds: int,
                           reopt_every: int | float = 10) -> StreamResult:
    """Benchmark with look-ahead.

    Every ``reopt_every`` rounds, the upcoming block of windows is replayed
    for every ``d = 1..N`` with the same seeds the rounds will use, and the
    ``d`` with the smallest total load over the block is kept (smaller ``d``
    on ties).  No fixed-per-block strategy does better on the same windows.
    ``reopt_every = math.inf`` picks one ``d`` for the whole stream.
    """
    if not reopt_every >= 1:
        raise ValueError("reopt_every must be >= 1")
    _check_stream(trace, config.deadline, n_rounds)
    block = n_rounds if not math.isfinite(reopt_every) else int(reopt_every)
    seeds = round_seeds(config.rng_seed, n_rounds)
    results, d_series = [], []
    for first in range(0, n_rounds, block):
        ks = range(first, min(first + block, n_rounds))
        windows = [trace.window(k * config.deadline, config.deadline) for k in ks]
        configs = [config.with_(rng_seed=seeds[k]) for k in ks]
        d = _best_block_d(windows, configs, trace.n_nodes)
        for w, c in zip(windows, configs):
            results.append(run_round(w, c.with_(seed_count=d)))
            d_series.append(d)
    return StreamResult(results, d_series)


def find_balanced_seed_count(trace: ContactTrace, config: RoundConfig, n_rounds: int,
                             d_max: int | None = None) -> int:
    """Fixed ``d`` at which the mean signal count equals ``d``.

    ``mean(s) - d`` decreases in ``d``; bisection finds the crossing and the
    neighbour with the smaller ``|mean(s) - d|`` wins (smaller ``d`` on ties).
    """
    n = trace.n_nodes
    hi = n if d_max is None else d_max
    cache: dict[int, float] = {}

    def excess(d: int) -> float:
        if d not in cache:
            cache[d] = float(run_fixed_stream(trace, config, d, n_rounds).signals.mean()) - d
        return cache[d]

    lo = 1
    if excess(lo) <= 0:
        return lo
    # gallop up from d = 1, the crossing is usually at small d
    probe = 2
    while probe < hi and excess(probe) > 0:
        lo, probe = probe, 2 * probe
    hi = min(hi, probe)
    while hi - lo > 1:  # excess(lo) > 0, answer in [lo, hi]
        mid = (lo + hi) // 2
        if excess(mid) > 0:
            lo = mid
        else:
            hi = mid
    return min((lo, hi), key=lambda d: (abs(excess(d)), d))
