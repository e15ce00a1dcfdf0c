"""Synthetic heterogeneous contact processes and contact-trace ingestion.

Rates are stored in contacts per second and times in seconds throughout.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

SECONDS_PER_DAY = 86400.0

__all__ = [
    "SECONDS_PER_DAY",
    "RateDistribution",
    "DurationDistribution",
    "ContactGraph",
    "ContactEvent",
    "ContactTrace",
    "TraceParseError",
    "sample_graph",
    "generate_trace",
    "concat_traces",
    "load_trace",
    "save_trace",
    "estimate_mean_rate",
]


class TraceParseError(ValueError):
    """Malformed row in a contact-trace file."""

    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


def _pareto_shape_from_moments(mean: float, stddev: float) -> float:
    return 1.0 + math.sqrt(1.0 + (mean / stddev) ** 2)


@dataclass(frozen=True)
class RateDistribution:
    """Pareto law of pairwise contact rates, given by its mean and stddev.

    The shape solving ``var / mean**2 = 1 / (k (k - 2))`` is
    ``k = 1 + sqrt(1 + mean**2 / stddev**2)``, always above 2 for a finite
    stddev.  ``stddev == 0`` is a point mass at ``mean``.
    """

    mean: float
    stddev: float
    kind: str = "pareto"

    def __post_init__(self):
        if self.kind != "pareto":
            raise ValueError(f"unsupported rate distribution {self.kind!r}")
        if not (self.mean > 0 and math.isfinite(self.mean)):
            raise ValueError(f"mean rate must be positive and finite, got {self.mean}")
        if not (self.stddev >= 0 and math.isfinite(self.stddev)):
            raise ValueError(f"stddev must be finite and >= 0, got {self.stddev}")
        if self.stddev > 0 and not self.shape > 2:
            raise ValueError(f"implied Pareto shape {self.shape} must exceed 2")

    @property
    def shape(self) -> float:
        if self.stddev == 0:
            return math.inf
        return _pareto_shape_from_moments(self.mean, self.stddev)

    @property
    def scale(self) -> float:
        k = self.shape
        if math.isinf(k):
            return self.mean
        return self.mean * (k - 1) / k

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.stddev == 0:
            return np.full(size, self.mean)
        return self.scale * (1.0 + rng.pareto(self.shape, size))


@dataclass(frozen=True)
class DurationDistribution:
    """Pareto contact durations with shape ``alpha`` and mean ``mean`` (s)."""

    mean: float
    shape: float = 2.0
    kind: str = "pareto"

    def __post_init__(self):
        if self.kind != "pareto":
            raise ValueError(f"unsupported duration distribution {self.kind!r}")
        if not self.shape > 1:
            raise ValueError(f"duration shape must exceed 1, got {self.shape}")
        if not self.mean > 0:
            raise ValueError(f"mean duration must be positive, got {self.mean}")

    @property
    def scale(self) -> float:
        return self.mean * (self.shape - 1) / self.shape

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return self.scale * (1.0 + rng.pareto(self.shape, size))


@dataclass(frozen=True)
class ContactGraph:
    """Symmetric matrix of pairwise contact rates (contacts/s)."""

    rates: np.ndarray
    mean_rate: float
    never_meet_prob: float = 0.0

    def __post_init__(self):
        r = np.asarray(self.rates, dtype=float)
        if r.ndim != 2 or r.shape[0] != r.shape[1]:
            raise ValueError("rates must be a square matrix")
        if not np.array_equal(r, r.T):
            raise ValueError("rates must be symmetric")
        if np.any(np.diag(r) != 0) or np.any(r < 0):
            raise ValueError("rates must be non-negative with zero diagonal")
        r.setflags(write=False)
        object.__setattr__(self, "rates", r)

    @property
    def n_nodes(self) -> int:
        return self.rates.shape[0]

    def node_rates(self) -> np.ndarray:
        """Aggregate contact rate of every node (row sums)."""
        return self.rates.sum(axis=1)

    def scaled(self, factor: float) -> "ContactGraph":
        return ContactGraph(self.rates * factor, self.mean_rate * factor, self.never_meet_prob)


def sample_graph(n: int, dist: RateDistribution, never_meet_prob: float = 0.0, rng_seed=None) -> ContactGraph:
    """Draw a heterogeneous contact graph.

    Every unordered pair independently never meets with probability
    ``never_meet_prob``; otherwise its rate is drawn from ``dist``.
    """
    if n < 2:
        raise ValueError(f"need at least 2 nodes, got {n}")
    if not 0.0 <= never_meet_prob <= 1.0:
        raise ValueError(f"never_meet_prob must be in [0, 1], got {never_meet_prob}")
    rng = np.random.default_rng(rng_seed)
    iu = np.triu_indices(n, 1)
    n_pairs = len(iu[0])
    isolated = rng.random(n_pairs) < never_meet_prob
    values = dist.sample(rng, n_pairs)
    values[isolated] = 0.0
    rates = np.zeros((n, n))
    rates[iu] = values
    rates = rates + rates.T
    return ContactGraph(rates, dist.mean, never_meet_prob)


@dataclass(frozen=True)
class ContactEvent:
    node_a: int
    node_b: int
    start: float
    duration: float

    @property
    def end(self) -> float:
        return self.start + self.duration


@dataclass(frozen=True)
class ContactTrace:
    """Time-sorted contact events stored column-wise.

    ``unsorted_rows`` counts rows that were out of order when loaded.
    """

    node_a: np.ndarray
    node_b: np.ndarray
    start: np.ndarray
    duration: np.ndarray
    horizon: float
    n_nodes: int
    unsorted_rows: int = field(default=0, compare=False)

    def __post_init__(self):
        a = np.asarray(self.node_a, dtype=np.int64)
        b = np.asarray(self.node_b, dtype=np.int64)
        s = np.asarray(self.start, dtype=float)
        d = np.asarray(self.duration, dtype=float)
        if not (len(a) == len(b) == len(s) == len(d)):
            raise ValueError("column lengths differ")
        if len(a):
            if np.any(a == b):
                raise ValueError("self-contacts are not allowed")
            if np.any(s < 0) or np.any(d < 0):
                raise ValueError("start and duration must be >= 0")
            if max(a.max(), b.max()) >= self.n_nodes or min(a.min(), b.min()) < 0:
                raise ValueError("node id out of range")
            if np.any(np.diff(s) < 0):
                raise ValueError("events must be sorted by start time")
        for arr in (a, b, s, d):
            arr.setflags(write=False)
        object.__setattr__(self, "node_a", a)
        object.__setattr__(self, "node_b", b)
        object.__setattr__(self, "start", s)
        object.__setattr__(self, "duration", d)

    @classmethod
    def empty(cls, n_nodes: int, horizon: float) -> "ContactTrace":
        z = np.zeros(0)
        return cls(z.astype(np.int64), z.astype(np.int64), z, z, horizon, n_nodes)

    def __len__(self) -> int:
        return len(self.start)

    def __iter__(self) -> Iterator[ContactEvent]:
        for a, b, s, d in zip(self.node_a, self.node_b, self.start, self.duration):
            yield ContactEvent(int(a), int(b), float(s), float(d))

    @property
    def events(self) -> list[ContactEvent]:
        return list(self)

    @property
    def end(self) -> np.ndarray:
        return self.start + self.duration

    def window(self, t0: float, length: float) -> "ContactTrace":
        """Contacts overlapping ``[t0, t0 + length]``, re-based to time 0.

        Contacts already in progress at ``t0`` keep their remaining duration
        and contacts running past the window end are cut there.
        """
        if length <= 0:
            raise ValueError("window length must be positive")
        if t0 < 0 or t0 + length > self.horizon * (1 + 1e-12):
            raise ValueError(f"window [{t0}, {t0 + length}] exceeds trace horizon {self.horizon}")
        t1 = t0 + length
        longest = float(self.duration.max()) if len(self) else 0.0
        # starts are sorted; contacts overlapping t0 started at most `longest` earlier
        lo = int(np.searchsorted(self.start, t0 - longest, side="left"))
        hi = int(np.searchsorted(self.start, t1, side="left"))
        s, e = self.start[lo:hi], self.start[lo:hi] + self.duration[lo:hi]
        sel = lo + np.flatnonzero((s >= t0) | (e > t0))
        end = self.end
        new_start = np.maximum(self.start[sel] - t0, 0.0)
        new_end = np.minimum(end[sel] - t0, length)
        order = np.lexsort((self.node_b[sel], self.node_a[sel], new_start))
        sel, new_start, new_end = sel[order], new_start[order], new_end[order]
        return ContactTrace(self.node_a[sel], self.node_b[sel], new_start, new_end - new_start, length, self.n_nodes)


def _merge_overlaps(a, b, start, end):
    """Merge overlapping contacts of the same pair."""
    if len(a) == 0:
        return a, b, start, end
    pair = a * (int(max(a.max(), b.max())) + 1) + b
    order = np.lexsort((start, pair))
    a, b, start, end, pair = a[order], b[order], start[order], end[order], pair[order]
    # offset per pair keeps the running max inside each pair's group
    span = float(end.max()) + 1.0
    _, group = np.unique(pair, return_inverse=True)
    shifted_end = np.maximum.accumulate(end + group * span)
    new_run = np.ones(len(a), dtype=bool)
    new_run[1:] = (start[1:] + group[1:] * span) > shifted_end[:-1]
    first = np.flatnonzero(new_run)
    merged_end = np.maximum.reduceat(end, first)
    return a[first], b[first], start[first], merged_end


def generate_trace(graph: ContactGraph, durations: DurationDistribution, horizon: float, rng_seed=None) -> ContactTrace:
    """Contact events over ``[0, horizon)`` for every pair with positive rate.

    Each pair's contact starts form a Poisson process of rate ``beta_xy``
    (Poisson count, then uniform order statistics); durations are i.i.d.
    Pareto.  Overlapping contacts of one pair are merged.
    """
    if not horizon > 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    rng = np.random.default_rng(rng_seed)
    n = graph.n_nodes
    iu, ju = np.triu_indices(n, 1)
    beta = graph.rates[iu, ju]
    live = beta > 0
    iu, ju, beta = iu[live], ju[live], beta[live]
    counts = rng.poisson(beta * horizon)
    total = int(counts.sum())
    a = np.repeat(iu, counts).astype(np.int64)
    b = np.repeat(ju, counts).astype(np.int64)
    start = rng.uniform(0.0, horizon, total)
    dur = durations.sample(rng, total)
    a, b, start, end = _merge_overlaps(a, b, start, start + dur)
    order = np.lexsort((b, a, start))
    return ContactTrace(a[order], b[order], start[order], (end - start)[order], float(horizon), n)


def concat_traces(traces: list[ContactTrace]) -> ContactTrace:
    """Play traces back to back; each one starts where the previous horizon ends.

    Same-pair contacts that overlap across a boundary are merged.
    """
    if not traces:
        raise ValueError("nothing to concatenate")
    n = traces[0].n_nodes
    if any(t.n_nodes != n for t in traces):
        raise ValueError("traces cover different node sets")
    offsets = np.concatenate([[0.0], np.cumsum([t.horizon for t in traces])])
    a = np.concatenate([t.node_a for t in traces])
    b = np.concatenate([t.node_b for t in traces])
    start = np.concatenate([t.start + off for t, off in zip(traces, offsets)])
    end = np.concatenate([t.end + off for t, off in zip(traces, offsets)])
    a, b, start, end = _merge_overlaps(a, b, start, end)
    order = np.lexsort((b, a, start))
    return ContactTrace(a[order], b[order], start[order], (end - start)[order], float(offsets[-1]), n)


def load_trace(path, horizon: float | None = None) -> ContactTrace:
    """Read a ``node_a,node_b,start_seconds,duration_seconds`` CSV file.

    Lines starting with ``#`` and blank lines are skipped.  Node ids are
    integers and are remapped to ``0..n-1`` in increasing order.  Rows out of
    time order are sorted and counted in ``unsorted_rows``.  The horizon
    defaults to the latest contact end.
    """
    rows = []
    with open(Path(path), newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            fields = next(csv.reader([text]))
            if len(fields) != 4:
                raise TraceParseError(lineno, f"expected 4 fields, got {len(fields)}")
            try:
                a, b = int(fields[0]), int(fields[1])
                start, dur = float(fields[2]), float(fields[3])
            except ValueError as exc:
                raise TraceParseError(lineno, str(exc)) from None
            if a == b:
                raise TraceParseError(lineno, "self-contact")
            if not (math.isfinite(start) and math.isfinite(dur)) or start < 0 or dur < 0:
                raise TraceParseError(lineno, "start and duration must be finite and >= 0")
            rows.append((a, b, start, dur))
    if not rows:
        return ContactTrace.empty(0, horizon or 0.0)

    raw = np.array([(r[0], r[1]) for r in rows], dtype=np.int64)
    ids, inverse = np.unique(raw, return_inverse=True)
    inverse = inverse.reshape(raw.shape)
    a = np.minimum(inverse[:, 0], inverse[:, 1])
    b = np.maximum(inverse[:, 0], inverse[:, 1])
    start = np.array([r[2] for r in rows])
    dur = np.array([r[3] for r in rows])
    unsorted = int(np.count_nonzero(np.diff(start) < 0))
    order = np.lexsort((b, a, start))
    end_max = float((start + dur).max())
    return ContactTrace(a[order], b[order], start[order], dur[order],
                        float(horizon) if horizon is not None else end_max,
                        len(ids), unsorted_rows=unsorted)


def save_trace(trace: ContactTrace, path) -> None:
    """Write ``trace`` in the CSV format read by :func:`load_trace`."""
    with open(Path(path), "w", newline="") as fh:
        fh.write("# node_a,node_b,start_seconds,duration_seconds\n")
        for ev in trace:
            fh.write(f"{ev.node_a},{ev.node_b},{ev.start!r},{ev.duration!r}\n")


def estimate_mean_rate(trace: ContactTrace, window: float, start: float = 0.0) -> float:
    """Mean pairwise contact rate from the contacts starting in a window.

    ``2 * count / (n (n - 1) * window)``.
    """
    if not window > 0:
        raise ValueError(f"window must be positive, got {window}")
    n = trace.n_nodes
    if len(trace) == 0 or n < 2:
        return 0.0
    lo = np.searchsorted(trace.start, start, side="left")
    hi = np.searchsorted(trace.start, start + window, side="left")
    return 2.0 * (hi - lo) / (n * (n - 1) * window)
