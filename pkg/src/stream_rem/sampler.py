"""Case-control sampling of non-cited receivers from the risk set.

Every event draws from its own Philox stream keyed by ``(seed, event_index)``,
so assignments do not depend on iteration order.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np

from .data_model import EventLog, NodeTable

log_ = logging.getLogger(__name__)

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class ControlAssignment:
    event_index: int
    control: str


@dataclass(frozen=True)
class CandidateSet:
    event_index: int
    candidates: tuple


class RiskSetIndex:
    """Nodes ordered by publication date (ties keep ingestion order).

    The risk set at day ``t`` is the prefix ``order[:risk_size(t)]``.
    """

    def __init__(self, table: NodeTable):
        self.order = np.argsort(table.pub_date, kind="stable")
        self.sorted_pub = table.pub_date[self.order]
        self.position = np.empty_like(self.order)
        self.position[self.order] = np.arange(len(self.order))
        # positions of every node a sender cites, sorted
        pos = self.position[table.receiver]
        by_sender: dict[int, list[int]] = {}
        for s, p in zip(table.sender.tolist(), pos.tolist()):
            by_sender.setdefault(s, []).append(p)
        self.cited = {s: np.unique(np.array(v, dtype=np.int64)) for s, v in by_sender.items()}

    def risk_size(self, t):
        return np.searchsorted(self.sorted_pub, t, side="left")


def risk_index(log: EventLog) -> RiskSetIndex:
    table = log.table
    idx = getattr(table, "_risk_index", None)
    if idx is None:
        idx = table._risk_index = RiskSetIndex(table)
    return idx


def risk_set_size(log: EventLog, t: int) -> int:
    """Number of nodes published strictly before day ``t``."""
    return int(risk_index(log).risk_size(t))


def risk_set_sizes(log: EventLog, t) -> np.ndarray:
    return np.asarray(risk_index(log).risk_size(np.asarray(t)), dtype=np.int64)


def event_rng(seed: int, event_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[seed & _MASK64, event_index]))


def _eligible(index: RiskSetIndex, table: NodeTable, i: int):
    """Risk-set prefix length and the sorted excluded positions inside it."""
    n = int(index.risk_size(table.time[i]))
    excl = index.cited.get(int(table.sender[i]), np.empty(0, dtype=np.int64))
    excl = excl[excl < n]
    sender_pos = index.position[table.sender[i]]
    if sender_pos < n:
        excl = np.union1d(excl, [sender_pos])
    return n, excl


def _draw(index: RiskSetIndex, n: int, excl: np.ndarray, c: int, rng) -> np.ndarray:
    k = n - len(excl)
    u = rng.choice(k, size=min(c, k), replace=False)
    # map the u-th eligible slot onto the prefix, skipping excluded positions
    shifted = excl - np.arange(len(excl))
    pos = u + np.searchsorted(shifted, u, side="right")
    return index.order[pos]


def _sample(log: EventLog, c: int, seed: int, events=None):
    table = log.table
    index = risk_index(log)
    out, skipped = [], []
    for i in range(len(table.time)) if events is None else events:
        n, excl = _eligible(index, table, i)
        if n - len(excl) <= 0:
            skipped.append(i)
            continue
        out.append((i, _draw(index, n, excl, c, event_rng(seed, i))))
    if skipped:
        log_.warning("%d events have an empty risk set and are excluded", len(skipped))
    return out, skipped


def sample_controls(log: EventLog, seed: int, events=None) -> list[ControlAssignment]:
    """One uniformly drawn eligible non-cited control per event.

    Events without an eligible control are skipped (and logged).
    """
    ids = log.table.ids
    drawn, _ = _sample(log, 1, seed, events)
    return [ControlAssignment(i, ids[nodes[0]]) for i, nodes in drawn]


def sample_candidates(log: EventLog, c: int, seed: int) -> list[CandidateSet]:
    """``c`` distinct eligible candidates per event (all of them if fewer exist).

    With ``c == 1`` the result coincides with :func:`sample_controls`.
    """
    if c < 1:
        raise ValueError("c must be >= 1")
    ids = log.table.ids
    drawn, _ = _sample(log, c, seed)
    return [CandidateSet(i, tuple(ids[n] for n in nodes.tolist())) for i, nodes in drawn]


def candidate_time_varying(log: EventLog, candidates: list[CandidateSet]):
    """Cumulative citations and time since last citation for every candidate.

    Candidates are streamed in event-time order alongside the log. Returns two
    lists of arrays aligned with ``candidates``.
    """
    from .covariates import _stream

    table = log.table
    r, t, sizes = [], [], []
    for cs in candidates:
        r.extend(table.index[n] for n in cs.candidates)
        t.extend([int(table.time[cs.event_index])] * len(cs.candidates))
        sizes.append(len(cs.candidates))
    counts, gaps = _stream(table, r, t)
    bounds = np.cumsum([0] + sizes)
    return (
        [counts[a:b] for a, b in zip(bounds[:-1], bounds[1:])],
        [gaps[a:b] for a, b in zip(bounds[:-1], bounds[1:])],
    )


def write_controls(controls, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["event_index", "control"])
        for c in controls:
            w.writerow([c.event_index, c.control])


def read_controls(path) -> list[ControlAssignment]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return [ControlAssignment(int(r["event_index"]), r["control"]) for r in rows]


def write_candidates(candidates, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["event_index", "slot", "candidate"])
        for cs in candidates:
            for slot, node in enumerate(cs.candidates):
                w.writerow([cs.event_index, slot, node])
