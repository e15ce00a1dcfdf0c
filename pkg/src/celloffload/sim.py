"""Discrete-event simulation of one chunk-delivery round.

A round seeds ``d`` nodes over the cellular channel, lets the chunk spread
over the contacts of a trace window and fills the remaining nodes at the
deadline.  Copies carry the id of the seed they descend from; nodes that
could have received the chunk from more than one seed are marked
*multi-id*, and the nodes still holding a single id at the deadline signal
the content server.

Contacts are intervals.  By default nodes interact when a contact begins
(contacts already running at the start of the window begin at time zero):
id marks are exchanged instantly and a transfer starts if exactly one side
holds the chunk, succeeding when it completes before the contact ends.
With ``relay_in_progress`` a node that obtains the chunk or a new mark also
acts over every contact it is currently in.
"""

from __future__ import annotations

import heapq
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import partial

import numpy as np

from .mobility import ContactGraph, ContactTrace, DurationDistribution, generate_trace

__all__ = [
    "UNINFECTED",
    "MULTI_ID",
    "RoundConfig",
    "RoundResult",
    "LoadPoint",
    "DisseminationRound",
    "choose_seeds",
    "run_round",
    "run_round_from_graph",
    "empirical_load_curve",
    "arrival_times",
]

UNINFECTED = -2
MULTI_ID = -1

# same-time event order: completed transfers, then contact starts, then ends
_TRANSFER, _START, _END = 0, 1, 2

SEED_SELECTIONS = ("uniform_random", "greedy_contact_rate")


@dataclass(frozen=True)
class RoundConfig:
    """Parameters of one delivery round.

    ``chunk_bytes`` and ``opportunistic_bw`` (bits/s) fix the time a
    pairwise transfer needs.  ``cellular_bw`` is carried for reporting only;
    cellular deliveries are instantaneous.
    """

    deadline: float
    seed_count: int
    chunk_bytes: float = 1e6
    opportunistic_bw: float = 20e6
    cellular_bw: float = 600e3
    seed_selection: str = "uniform_random"
    rng_seed: int | None = 0
    relay_in_progress: bool = False

    def __post_init__(self):
        if not self.deadline > 0:
            raise ValueError(f"deadline must be positive, got {self.deadline}")
        if self.seed_count < 1:
            raise ValueError(f"seed_count must be >= 1, got {self.seed_count}")
        if not (self.chunk_bytes > 0 and self.opportunistic_bw > 0 and self.cellular_bw > 0):
            raise ValueError("chunk size and bandwidths must be positive")
        if self.seed_selection not in SEED_SELECTIONS:
            raise ValueError(f"unknown seed selection {self.seed_selection!r}")

    @property
    def transfer_time(self) -> float:
        return self.chunk_bytes * 8.0 / self.opportunistic_bw

    def with_(self, **changes) -> "RoundConfig":
        return replace(self, **changes)


@dataclass
class RoundResult:
    """Outcome of one round.

    ``cellular_copies`` is ``D``; ``signals`` is the uplink message count
    (single-id nodes for the copy-id protocol, one acknowledgement per
    infection for push-and-track).
    """

    seed_count: int
    cellular_copies: int
    signals: int
    infected_at_deadline: int
    per_node_comms: np.ndarray
    opportunistic_transfers: int
    single_id: int = 0

    @property
    def n_nodes(self) -> int:
        return len(self.per_node_comms)


@dataclass(frozen=True)
class LoadPoint:
    d: int
    mean_load: float
    load_se: float
    mean_signals: float
    signals_se: float
    replications: int


class DisseminationRound:
    """Event engine for one round over a trace window.

    Drive it with :meth:`inject` and :meth:`run_until`; ``status`` holds
    :data:`UNINFECTED`, :data:`MULTI_ID` or the seed id of every node.
    """

    def __init__(self, window: ContactTrace, deadline: float, transfer_time: float,
                 relay_in_progress: bool = False):
        self.n = window.n_nodes
        self.relay = relay_in_progress
        self.deadline = deadline
        self.tx = transfer_time
        self.a = window.node_a
        self.b = window.node_b
        self.contact_end = np.minimum(window.start + window.duration, deadline)
        self.status = np.full(self.n, UNINFECTED, dtype=np.int64)
        self.comms = np.zeros(self.n, dtype=np.int64)
        self.infected = 0
        self.cellular = 0
        self.transfers = 0
        self.now = 0.0
        self._next_id = 0
        self._active: list[set[int]] = [set() for _ in range(self.n)]
        self._pending = np.zeros(len(window), dtype=bool)
        self._seq = 0
        self._heap: list[tuple] = []
        for ci, t in enumerate(window.start):
            if t <= deadline:
                self._heap.append((float(t), _START, ci, ci, -1))
        self._seq = len(window)
        heapq.heapify(self._heap)

    def _push(self, t, kind, ci, sender):
        self._seq += 1
        heapq.heappush(self._heap, (t, kind, self._seq, ci, sender))

    def inject(self, node: int, tag: int | None = None) -> None:
        """Cellular delivery to an uninfected node at the current time.

        ``tag`` is the copy id; by default each injection gets a fresh id.
        """
        if self.status[node] != UNINFECTED:
            raise ValueError(f"node {node} already holds the chunk")
        if tag is None:
            tag = self._next_id
            self._next_id += 1
        self.status[node] = tag
        self.infected += 1
        self.cellular += 1
        self.comms[node] += 1
        self._settle([node])

    def run_until(self, t: float) -> None:
        """Process every event at or before ``t``."""
        heap = self._heap
        while heap and heap[0][0] <= t:
            when, kind, _, ci, sender = heapq.heappop(heap)
            self.now = when
            if kind == _START:
                u, v = int(self.a[ci]), int(self.b[ci])
                self._active[u].add(ci)
                self._active[v].add(ci)
                self._push(float(self.contact_end[ci]), _END, ci, -1)
                self._settle(self._touch(ci))
            elif kind == _END:
                self._active[int(self.a[ci])].discard(ci)
                self._active[int(self.b[ci])].discard(ci)
            else:
                self._complete(ci, sender)
        self.now = max(self.now, t)

    def _complete(self, ci: int, sender: int) -> None:
        self._pending[ci] = False
        u, v = int(self.a[ci]), int(self.b[ci])
        receiver = v if sender == u else u
        if self.status[receiver] == UNINFECTED:
            self.status[receiver] = self.status[sender]
            self.infected += 1
            self.transfers += 1
            self.comms[sender] += 1
            self.comms[receiver] += 1
            self._settle([receiver])
        else:
            self._settle(self._touch(ci))

    def _touch(self, ci: int) -> list[int]:
        """Apply the contact rules to an ongoing contact.

        Returns the nodes whose status changed.
        """
        u, v = int(self.a[ci]), int(self.b[ci])
        su, sv = self.status[u], self.status[v]
        if su != UNINFECTED and sv != UNINFECTED:
            if su == sv:
                return []
            changed = []
            if su != MULTI_ID:
                self.status[u] = MULTI_ID
                changed.append(u)
            if sv != MULTI_ID:
                self.status[v] = MULTI_ID
                changed.append(v)
            return changed
        if su == UNINFECTED and sv == UNINFECTED or self._pending[ci]:
            return []
        sender = u if su != UNINFECTED else v
        done = self.now + self.tx
        if done <= self.contact_end[ci]:
            self._pending[ci] = True
            self._push(done, _TRANSFER, ci, sender)
        return []

    def _settle(self, nodes: list[int]) -> None:
        if not self.relay:
            return
        work = list(nodes)
        while work:
            node = work.pop()
            for ci in sorted(self._active[node]):
                work.extend(self._touch(ci))

    def single_id_count(self) -> int:
        return int(np.count_nonzero(self.status >= 0))


def choose_seeds(n: int, d: int, selection: str, rng: np.random.Generator, node_weights=None) -> np.ndarray:
    """Seed nodes: uniform without replacement, or the ``d`` highest-rate nodes.

    Uniform seeds are a prefix of one random permutation, so for a fixed
    generator state the seed sets are nested in ``d``.
    """
    if d > n:
        raise ValueError(f"cannot pick {d} seeds among {n} nodes")
    if selection == "uniform_random":
        return rng.permutation(n)[:d]
    if selection == "greedy_contact_rate":
        if node_weights is None:
            raise ValueError("greedy seed selection needs node contact rates")
        order = np.argsort(-np.asarray(node_weights, dtype=float), kind="stable")
        return order[:d]
    raise ValueError(f"unknown seed selection {selection!r}")


def run_round(trace_window: ContactTrace, config: RoundConfig, node_weights=None) -> RoundResult:
    """Simulate one round of the copy-id protocol over ``trace_window``.

    ``node_weights`` (aggregate contact rates) is only needed for greedy
    seeding.
    """
    if trace_window.horizon < config.deadline:
        raise ValueError(f"trace window ({trace_window.horizon} s) shorter than the deadline ({config.deadline} s)")
    n = trace_window.n_nodes
    if config.seed_count > n:
        raise ValueError(f"seed_count {config.seed_count} exceeds N={n}")
    rng = np.random.default_rng(config.rng_seed)
    seeds = choose_seeds(n, config.seed_count, config.seed_selection, rng, node_weights)
    engine = DisseminationRound(trace_window, config.deadline, config.transfer_time, config.relay_in_progress)
    for node in seeds:
        engine.inject(int(node))
    engine.run_until(config.deadline)

    s = engine.single_id_count()
    infected = engine.infected
    comms = engine.comms.copy()
    comms[engine.status == UNINFECTED] += 1  # deadline fill
    comms[engine.status >= 0] += 1  # signal to the server
    return RoundResult(
        seed_count=config.seed_count,
        cellular_copies=config.seed_count + (n - infected),
        signals=s,
        infected_at_deadline=infected,
        per_node_comms=comms,
        opportunistic_transfers=engine.transfers,
        single_id=s,
    )


def _round_inputs(graph: ContactGraph, durations: DurationDistribution, config: RoundConfig):
    trace_seed, round_seed = np.random.SeedSequence(config.rng_seed).spawn(2)
    trace = generate_trace(graph, durations, config.deadline, rng_seed=trace_seed)
    return trace, config.with_(rng_seed=int(round_seed.generate_state(1)[0]))


def run_round_from_graph(graph: ContactGraph, durations: DurationDistribution, config: RoundConfig) -> RoundResult:
    """Draw a fresh trace over ``[0, T_c]`` from ``graph`` and run a round."""
    trace, round_cfg = _round_inputs(graph, durations, config)
    return run_round(trace, round_cfg, node_weights=graph.node_rates())


def _mean_se(x) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    if len(x) < 2:
        return float(x.mean()), 0.0
    return float(x.mean()), float(x.std(ddof=1) / np.sqrt(len(x)))


def _replicate(graph, durations, config_base, d_values, seed) -> list[tuple[int, int]]:
    """(D, s) for every d of one replication; the trace is drawn once."""
    trace, cfg = _round_inputs(graph, durations, config_base.with_(rng_seed=seed))
    weights = graph.node_rates()
    out = []
    for d in d_values:
        res = run_round(trace, cfg.with_(seed_count=int(d)), node_weights=weights)
        out.append((res.cellular_copies, res.signals))
    return out


def empirical_load_curve(graph: ContactGraph, durations: DurationDistribution, config_base: RoundConfig,
                         d_values, replications: int = 100, master_seed: int = 0,
                         workers: int = 1) -> list[LoadPoint]:
    """Monte-Carlo mean of ``D`` and ``s`` for every ``d`` in ``d_values``.

    Replication ``r`` uses the same derived seed for every ``d`` (common
    random numbers), so the curve is smooth in ``d`` and reproducible.
    With ``workers > 1`` replications run in a process pool; each one is
    fully determined by its own seed, so the result does not depend on the
    number of workers.
    """
    if replications < 1:
        raise ValueError("replications must be >= 1")
    if workers < 1:
        raise ValueError("workers must be >= 1")
    d_values = [int(d) for d in d_values]
    rep_seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(master_seed).spawn(replications)]
    task = partial(_replicate, graph, durations, config_base, d_values)
    if workers == 1:
        reps = [task(seed) for seed in rep_seeds]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reps = list(pool.map(task, rep_seeds, chunksize=max(1, replications // (4 * workers))))
    table = np.array(reps, dtype=float)  # (replications, len(d_values), 2)
    points = []
    for j, d in enumerate(d_values):
        m_d, se_d = _mean_se(table[:, j, 0])
        m_s, se_s = _mean_se(table[:, j, 1])
        points.append(LoadPoint(d, m_d, se_d, m_s, se_s, replications))
    return points


def arrival_times(window: ContactTrace, deadline: float, transfer_time: float, sources=None,
                  relay_in_progress: bool = False) -> np.ndarray:
    """Earliest chunk arrival at every node from each single source.

    Row ``k`` holds arrival times when only ``sources[k]`` is seeded at time
    zero (``inf`` where unreachable before the deadline).  Relaxation sweeps
    over the contacts repeat until nothing changes, which also captures
    transfers starting in the middle of a contact when ``relay_in_progress``.
    Assumes ``window`` is sorted by start time, as :meth:`ContactTrace.window`
    returns it.
    """
    n = window.n_nodes
    sources = np.arange(n) if sources is None else np.asarray(sources)
    arr = np.full((len(sources), n), np.inf)
    arr[np.arange(len(sources)), sources] = 0.0
    a, b = window.node_a, window.node_b
    start = window.start
    end = np.minimum(window.start + window.duration, deadline)
    keep = start <= deadline
    a, b, start, end = a[keep], b[keep], start[keep], end[keep]
    # without mid-contact relay a transfer enabling a contact starting at s
    # completes by s, so its own contact started strictly earlier: one pass
    # in start order suffices when transfers take time
    single_pass = not relay_in_progress and transfer_time > 0
    changed = True
    while changed:
        changed = False
        for u, v, s, e in zip(a, b, start, end):
            au, av = arr[:, u], arr[:, v]
            if relay_in_progress:
                tu = np.maximum(au, s) + transfer_time
                tv = np.maximum(av, s) + transfer_time
            else:
                tu = np.where(au <= s, s + transfer_time, np.inf)
                tv = np.where(av <= s, s + transfer_time, np.inf)
            new_v = np.where(tu <= e, np.minimum(av, tu), av)
            new_u = np.where(tv <= e, np.minimum(au, tv), au)
            if np.any(new_v < av) or np.any(new_u < au):
                arr[:, v] = new_v
                arr[:, u] = new_u
                changed = not single_pass
    return arr
