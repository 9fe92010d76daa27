"""Events, node attributes and the time-ordered event log.

Timestamps are integer day counts since 1970-01-01. A receiver is at risk for a
citation at day ``t`` only if it was published strictly before ``t``.
"""
from __future__ import annotations

import csv
import datetime as _dt
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .exceptions import DuplicateDyad, MalformedRow, MissingAttribute, TimeViolation

EPOCH_ORDINAL = _dt.date(1970, 1, 1).toordinal()
EMBEDDING_TOL = 1e-6

EVENT_HEADER = ["sender", "receiver", "time"]
ATTRIBUTE_HEADER = ["node", "pub_date", "ipc_classes", "embedding", "outdegree"]


def date_to_days(value: str | _dt.date) -> int:
    if isinstance(value, str):
        value = _dt.date.fromisoformat(value)
    return value.toordinal() - EPOCH_ORDINAL


def days_to_date(days: int) -> _dt.date:
    return _dt.date.fromordinal(int(days) + EPOCH_ORDINAL)


@dataclass(frozen=True)
class Event:
    sender: str
    receiver: str
    time: int


@dataclass(frozen=True)
class NodeAttributes:
    node: str
    pub_date: int
    ipc_classes: frozenset = frozenset()
    embedding: tuple | None = None
    outdegree_at_pub: int = 0


@dataclass(frozen=True)
class Violation:
    kind: str
    event_index: int | None
    message: str
    line: int | None = None
    node: str | None = None


@dataclass(frozen=True)
class EventLog:
    """Immutable event log plus the attribute lookup for every node.

    Numeric views used by the vectorised code paths are built lazily on first
    access (``log.table``) and shared afterwards.
    """

    events: tuple
    attributes: Mapping[str, NodeAttributes]
    lines: tuple | None = field(default=None, compare=False, repr=False)

    def __len__(self):
        return len(self.events)

    @property
    def n_nodes(self):
        return len(self.attributes)

    @cached_property
    def table(self) -> "NodeTable":
        return NodeTable.from_log(self)


class NodeTable:
    """Dense integer-indexed arrays for nodes and events.

    Nodes are indexed in attribute ingestion order. ``ipc`` is a CSR indicator
    matrix (nodes x distinct class codes); ``embedding`` rows are NaN for nodes
    without an embedding.
    """

    def __init__(self, ids, pub_date, outdegree, ipc, embedding, sender, receiver, time):
        self.ids = list(ids)
        self.index = {node: i for i, node in enumerate(self.ids)}
        self.pub_date = np.asarray(pub_date, dtype=np.int64)
        self.outdegree = np.asarray(outdegree, dtype=np.int64)
        self.ipc = ipc
        self.ipc_size = np.asarray(ipc.sum(axis=1)).ravel().astype(np.int64)
        self.embedding = embedding
        self.sender = np.asarray(sender, dtype=np.int64)
        self.receiver = np.asarray(receiver, dtype=np.int64)
        self.time = np.asarray(time, dtype=np.int64)

    @classmethod
    def from_log(cls, log: EventLog) -> "NodeTable":
        attrs = list(log.attributes.values())
        ids = [a.node for a in attrs]
        index = {node: i for i, node in enumerate(ids)}
        codes = sorted({c for a in attrs for c in a.ipc_classes})
        code_index = {c: j for j, c in enumerate(codes)}
        rows, cols = [], []
        for i, a in enumerate(attrs):
            for c in a.ipc_classes:
                rows.append(i)
                cols.append(code_index[c])
        ipc = sp.csr_matrix(
            (np.ones(len(rows)), (rows, cols)), shape=(len(attrs), max(len(codes), 1))
        )
        dims = {len(a.embedding) for a in attrs if a.embedding is not None}
        embedding = None
        if dims:
            if len(dims) > 1:
                raise ValueError("embeddings have inconsistent lengths")
            embedding = np.full((len(attrs), dims.pop()), np.nan)
            for i, a in enumerate(attrs):
                if a.embedding is not None:
                    embedding[i] = a.embedding
        return cls(
            ids,
            [a.pub_date for a in attrs],
            [a.outdegree_at_pub for a in attrs],
            ipc,
            embedding,
            [index[e.sender] for e in log.events],
            [index[e.receiver] for e in log.events],
            [e.time for e in log.events],
        )


def make_event_log(events: Iterable[Event], attributes: Iterable[NodeAttributes] | Mapping) -> EventLog:
    """Build a log without validation, stably sorting events by time."""
    if isinstance(attributes, Mapping):
        attributes = attributes.values()
    attrs = {a.node: a for a in attributes}
    events = sorted(events, key=lambda e: e.time)
    return EventLog(tuple(events), attrs)


def validate(log: EventLog) -> list[Violation]:
    """Enumerate every invariant violation of ``log``; empty when valid."""
    out: list[Violation] = []
    attrs = log.attributes
    seen: dict[tuple, int] = {}
    lines = log.lines
    prev = None
    for i, e in enumerate(log.events):
        line = lines[i] if lines is not None else None
        if prev is not None and e.time < prev:
            out.append(Violation("OrderingViolation", i, f"time {e.time} < previous {prev}", line))
        prev = e.time
        missing = [n for n in (e.sender, e.receiver) if n not in attrs]
        for n in missing:
            out.append(Violation("MissingAttribute", i, f"unknown node {n!r}", line, n))
        if e.sender == e.receiver:
            out.append(Violation("SelfLoop", i, f"{e.sender!r} cites itself", line))
        if not missing:
            if attrs[e.sender].pub_date != e.time:
                out.append(
                    Violation(
                        "SenderTimeMismatch",
                        i,
                        f"event time {e.time} differs from sender pub_date {attrs[e.sender].pub_date}",
                        line,
                    )
                )
            if attrs[e.receiver].pub_date >= e.time:
                out.append(
                    Violation(
                        "TimeViolation",
                        i,
                        f"receiver {e.receiver!r} published day {attrs[e.receiver].pub_date}, "
                        f"not before citation day {e.time}",
                        line,
                    )
                )
        key = (e.sender, e.receiver)
        if key in seen:
            out.append(Violation("DuplicateDyad", i, f"pair {key} repeats event {seen[key]}", line))
        else:
            seen[key] = i
    for a in attrs.values():
        if a.embedding is not None:
            norm = math.sqrt(sum(v * v for v in a.embedding))
            if abs(norm - 1.0) > EMBEDDING_TOL:
                out.append(Violation("EmbeddingNorm", None, f"node {a.node!r} embedding norm {norm}"))
    return out


_RAISE = {
    "MissingAttribute": None,
    "TimeViolation": TimeViolation,
    "SenderTimeMismatch": TimeViolation,
    "DuplicateDyad": DuplicateDyad,
}


def _parse_attributes(path: Path) -> dict[str, NodeAttributes]:
    attrs: dict[str, NodeAttributes] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ATTRIBUTE_HEADER:
            raise MalformedRow(path, 1, f"expected header {ATTRIBUTE_HEADER}, got {header}")
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5:
                raise MalformedRow(path, line, f"expected 5 fields, got {len(row)}")
            node, pub, ipc, emb, outdeg = row
            try:
                pub_date = date_to_days(pub)
                classes = frozenset(c for c in ipc.split(";") if c)
                embedding = tuple(float(v) for v in emb.split(";")) if emb else None
                outdegree = int(outdeg)
            except ValueError as exc:
                raise MalformedRow(path, line, str(exc)) from None
            if outdegree < 0:
                raise MalformedRow(path, line, "negative outdegree")
            if embedding is not None:
                norm = math.sqrt(sum(v * v for v in embedding))
                if abs(norm - 1.0) > EMBEDDING_TOL:
                    raise MalformedRow(path, line, f"embedding norm {norm} is not 1")
            if node in attrs:
                raise MalformedRow(path, line, f"duplicate node {node!r}")
            attrs[node] = NodeAttributes(node, pub_date, classes, embedding, outdegree)
    return attrs


def _parse_events(path: Path) -> list[tuple[Event, int]]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != EVENT_HEADER:
            raise MalformedRow(path, 1, f"expected header {EVENT_HEADER}, got {header}")
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise MalformedRow(path, line, f"expected 3 fields, got {len(row)}")
            try:
                rows.append((Event(row[0], row[1], date_to_days(row[2])), line))
            except ValueError as exc:
                raise MalformedRow(path, line, str(exc)) from None
    return rows


def read_event_log(events_path, attributes_path, drop_invalid=False) -> tuple[EventLog, list[Violation]]:
    """Parse both CSV files and validate them.

    Returns the log and the violation report. With ``drop_invalid`` every
    event named in the report is removed from the returned log; otherwise the
    log is returned as parsed. Parse failures always raise ``MalformedRow``.
    """
    attrs = _parse_attributes(Path(attributes_path))
    parsed = _parse_events(Path(events_path))
    parsed.sort(key=lambda pair: pair[0].time)
    log = EventLog(tuple(e for e, _ in parsed), attrs, tuple(line for _, line in parsed))
    report = validate(log)
    if drop_invalid and report:
        bad = {v.event_index for v in report if v.event_index is not None}
        keep = [i for i in range(len(log.events)) if i not in bad]
        log = EventLog(
            tuple(log.events[i] for i in keep), attrs, tuple(log.lines[i] for i in keep)
        )
    return log, report


def load_event_log(events_path, attributes_path) -> EventLog:
    """Load and strictly validate an event log, raising on the first violation."""
    log, report = read_event_log(events_path, attributes_path)
    for v in report:
        if v.kind == "MissingAttribute":
            raise MissingAttribute(v.node, v.line)
        exc = _RAISE.get(v.kind)
        if exc is not None:
            raise exc(f"line {v.line}: {v.message}")
        raise MalformedRow(events_path, v.line, v.message)
    return log


def write_event_log(log: EventLog, events_path, attributes_path) -> None:
    with open(events_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(EVENT_HEADER)
        for e in log.events:
            w.writerow([e.sender, e.receiver, days_to_date(e.time).isoformat()])
    with open(attributes_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(ATTRIBUTE_HEADER)
        for a in log.attributes.values():
            emb = "" if a.embedding is None else ";".join(repr(float(v)) for v in a.embedding)
            w.writerow(
                [
                    a.node,
                    days_to_date(a.pub_date).isoformat(),
                    ";".join(sorted(a.ipc_classes)),
                    emb,
                    a.outdegree_at_pub,
                ]
            )


def subset_events(log: EventLog, keep: Sequence[int]) -> EventLog:
    """Log restricted to the events at positions ``keep`` (attributes unchanged)."""
    lines = None if log.lines is None else tuple(log.lines[i] for i in keep)
    return EventLog(tuple(log.events[i] for i in keep), log.attributes, lines)
