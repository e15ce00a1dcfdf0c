"""Aggregate round results: load, offload, fairness, signaling, series export."""

from __future__ import annotations

import csv
import io
import json
from typing import Sequence

import numpy as np

from .sim import RoundResult

__all__ = [
    "SERIES_COLUMNS",
    "mean_load",
    "offload_fraction",
    "jain_fairness",
    "accumulated_comms",
    "signaling_per_user",
    "series_rows",
    "export_series",
    "load_series",
    "write_table",
]

# per-round export schema:
#   round        0-based round index
#   d            seeds delivered at round start
#   s            signals received at round end (single-id nodes, or acks)
#   D            cellular copies of the round (seeds + re-injections + fill)
#   infected     nodes holding the chunk at the deadline before the fill
#   signals      running total of s up to and including this round
#   jfi_running  Jain index of per-node communications accumulated so far
SERIES_COLUMNS = ("round", "d", "s", "D", "infected", "signals", "jfi_running")


def _nonempty(results: Sequence[RoundResult]) -> None:
    if len(results) == 0:
        raise ValueError("empty result series")


def mean_load(results: Sequence[RoundResult]) -> float:
    _nonempty(results)
    return float(np.mean([r.cellular_copies for r in results]))


def offload_fraction(results: Sequence[RoundResult], n: int) -> float:
    """Share of deliveries that did not use the cellular channel, ``1 - mean(D)/N``."""
    return 1.0 - mean_load(results) / n


def jain_fairness(x) -> float:
    x = np.asarray(x, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("Jain index of an empty vector")
    if np.any(x < 0) or not np.all(np.isfinite(x)):
        raise ValueError("Jain index needs finite non-negative entries")
    sq = float(np.dot(x, x))
    if sq == 0:
        raise ValueError("Jain index undefined for an all-zero vector")
    return float(x.sum()) ** 2 / (x.size * sq)


def accumulated_comms(results: Sequence[RoundResult]) -> np.ndarray:
    _nonempty(results)
    return np.sum([r.per_node_comms for r in results], axis=0)


def signaling_per_user(results: Sequence[RoundResult], n: int) -> float:
    """Mean signals per user per round.

    The ``signals`` field already holds single-id signals for the copy-id
    protocol and acknowledgements (one per infected node) for push-and-track.
    """
    _nonempty(results)
    return float(np.mean([r.signals for r in results])) / n


def series_rows(results: Sequence[RoundResult]) -> list[tuple]:
    rows = []
    total = 0
    comms = None
    for k, r in enumerate(results):
        total += int(r.signals)
        comms = np.array(r.per_node_comms, dtype=np.int64) if comms is None else comms + r.per_node_comms
        jfi = jain_fairness(comms) if comms.any() else 1.0
        rows.append((k, int(r.seed_count), int(r.signals), int(r.cellular_copies), int(r.infected_at_deadline),
                     total, float(jfi)))
    return rows


def _metadata_json(metadata: dict | None) -> str:
    return json.dumps(metadata, sort_keys=True, separators=(",", ":"))


def export_series(results: Sequence[RoundResult], path, fmt: str = "csv", metadata: dict | None = None) -> None:
    """Write the per-round series.

    CSV: optional ``# metadata: {json}`` first line, then the header and one
    row per round.  JSON: ``{"metadata", "columns", "rows"}``.  Floats are
    written with ``repr`` so both formats round-trip exactly and the bytes
    depend only on the inputs.
    """
    rows = series_rows(results)
    if fmt == "csv":
        buf = io.StringIO()
        if metadata is not None:
            buf.write(f"# metadata: {_metadata_json(metadata)}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SERIES_COLUMNS)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])
        text = buf.getvalue()
    elif fmt == "json":
        doc = {"metadata": metadata, "columns": list(SERIES_COLUMNS), "rows": [list(r) for r in rows]}
        text = json.dumps(doc, sort_keys=True, indent=1) + "\n"
    else:
        raise ValueError(f"unknown export format {fmt!r}")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def load_series(path, fmt: str | None = None) -> tuple[list[dict], dict | None]:
    """Read a file written by :func:`export_series`; returns (rows, metadata)."""
    path = str(path)
    if fmt is None:
        fmt = "json" if path.endswith(".json") else "csv"
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if fmt == "json":
        doc = json.loads(text)
        cols = doc["columns"]
        return [dict(zip(cols, row)) for row in doc["rows"]], doc["metadata"]
    if fmt != "csv":
        raise ValueError(f"unknown export format {fmt!r}")
    lines = text.splitlines()
    metadata = None
    if lines and lines[0].startswith("# metadata: "):
        metadata = json.loads(lines[0][len("# metadata: "):])
        lines = lines[1:]
    reader = csv.DictReader(lines)
    if tuple(reader.fieldnames or ()) != SERIES_COLUMNS:
        raise ValueError(f"unexpected columns {reader.fieldnames}")
    rows = []
    for rec in reader:
        rows.append({k: (float(v) if k == "jfi_running" else int(v)) for k, v in rec.items()})
    return rows, metadata


def write_table(rows: Sequence[dict], path, metadata: dict | None = None) -> None:
    """CSV of dict rows (columns in first-row order) with an optional metadata line."""
    buf = io.StringIO()
    if metadata is not None:
        buf.write(f"# metadata: {_metadata_json(metadata)}\n")
    if rows:
        cols = list(rows[0])
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in (row[c] for c in cols)])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())
