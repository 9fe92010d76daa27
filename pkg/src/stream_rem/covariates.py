"""Dyadic, nodal and time-varying statistics for (sender, receiver, time) triples."""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .data_model import EventLog, NodeAttributes, NodeTable, days_to_date
from .exceptions import EmptyClassSet, MalformedRow, MissingEmbedding, UnknownEffect, UnknownNode, UnsortedQueries

DAYS_PER_YEAR = 365.25


class EffectKind(str, enum.Enum):
    RECEIVER_PUB_YEAR = "receiver_pub_year"
    TIME_LAG = "time_lag"
    RECEIVER_OUTDEGREE = "receiver_outdegree"
    TEXTUAL_SIMILARITY = "textual_similarity"
    IPC_JACCARD = "ipc_jaccard"
    CUMULATIVE_CITATIONS = "cumulative_citations"
    TIME_FROM_LAST_EVENT = "time_from_last_event"

    @property
    def time_varying(self) -> bool:
        return self in (EffectKind.CUMULATIVE_CITATIONS, EffectKind.TIME_FROM_LAST_EVENT)

    @property
    def default_transform(self) -> str:
        # counts and waiting times enter the spline on log(1 + x)
        if self in (
            EffectKind.RECEIVER_OUTDEGREE,
            EffectKind.CUMULATIVE_CITATIONS,
            EffectKind.TIME_FROM_LAST_EVENT,
        ):
            return "log1p"
        return "identity"

    @classmethod
    def parse(cls, name: str) -> "EffectKind":
        try:
            return cls(name)
        except ValueError:
            pass
        try:
            return cls[name.upper()]
        except KeyError:
            raise UnknownEffect(f"unknown effect {name!r}") from None


GROUPS = {
    "nodal": (EffectKind.RECEIVER_PUB_YEAR, EffectKind.TIME_LAG, EffectKind.RECEIVER_OUTDEGREE),
    "similarity": (EffectKind.TEXTUAL_SIMILARITY, EffectKind.IPC_JACCARD),
    "time_varying": (EffectKind.CUMULATIVE_CITATIONS, EffectKind.TIME_FROM_LAST_EVENT),
}


def parse_effects(spec: str) -> tuple[EffectKind, ...]:
    """Parse a comma separated list of group names and/or effect names."""
    kinds: list[EffectKind] = []
    for token in (t.strip() for t in spec.split(",")):
        if not token:
            continue
        members = GROUPS.get(token.replace("-", "_")) or (EffectKind.parse(token),)
        kinds.extend(k for k in members if k not in kinds)
    return tuple(kinds)


def _attr(attrs: Mapping[str, NodeAttributes], node) -> NodeAttributes:
    try:
        return attrs[node]
    except KeyError:
        raise UnknownNode(node) from None


def days_to_year(days):
    """Continuous calendar year: year + (0-based day of year) / 365.25."""
    d = np.asarray(days, dtype=np.int64).astype("datetime64[D]")
    y = d.astype("datetime64[Y]")
    doy = (d - y.astype("datetime64[D]")).astype(np.int64)
    return y.astype(np.int64) + 1970 + doy / DAYS_PER_YEAR


def receiver_pub_year(r, attrs) -> float:
    a = _attr(attrs, r)
    date = days_to_date(a.pub_date)
    return date.year + (date.timetuple().tm_yday - 1) / DAYS_PER_YEAR


def time_lag(s, r, attrs) -> float:
    return float(_attr(attrs, s).pub_date - _attr(attrs, r).pub_date)


def receiver_outdegree(r, attrs) -> int:
    return _attr(attrs, r).outdegree_at_pub


def count_outdegrees(log: EventLog) -> dict:
    """Out-citations per node counted directly from the log."""
    out = {node: 0 for node in log.attributes}
    for e in log.events:
        out[e.sender] += 1
    return out


def textual_similarity(s, r, attrs) -> float:
    a, b = _attr(attrs, s).embedding, _attr(attrs, r).embedding
    if a is None or b is None:
        raise MissingEmbedding(f"embedding missing for {s if a is None else r!r}")
    dot = sum(x * y for x, y in zip(a, b))
    norm = math.sqrt(sum(x * x for x in a)) * math.sqrt(sum(y * y for y in b))
    return max(-1.0, min(1.0, dot / norm))


def ipc_jaccard(s, r, attrs) -> float:
    a, b = _attr(attrs, s).ipc_classes, _attr(attrs, r).ipc_classes
    if not a or not b:
        raise EmptyClassSet(f"no IPC classes for {s if not a else r!r}")
    return len(a & b) / len(a | b)


def fixed_statistic(table: NodeTable, kind: EffectKind, s, r) -> np.ndarray:
    """Vectorised fixed (non time-varying) statistic for index arrays ``s``, ``r``."""
    s = np.asarray(s, dtype=np.int64)
    r = np.asarray(r, dtype=np.int64)
    if kind is EffectKind.RECEIVER_PUB_YEAR:
        return days_to_year(table.pub_date[r])
    if kind is EffectKind.TIME_LAG:
        return (table.pub_date[s] - table.pub_date[r]).astype(float)
    if kind is EffectKind.RECEIVER_OUTDEGREE:
        return table.outdegree[r].astype(float)
    if kind is EffectKind.TEXTUAL_SIMILARITY:
        if table.embedding is None:
            raise MissingEmbedding("no embeddings loaded")
        es, er = table.embedding[s], table.embedding[r]
        cos = np.einsum("ij,ij->i", es, er) / (
            np.linalg.norm(es, axis=1) * np.linalg.norm(er, axis=1)
        )
        if np.isnan(cos).any():
            bad = s[np.isnan(cos)][0]
            raise MissingEmbedding(f"embedding missing near node {table.ids[bad]!r}")
        return np.clip(cos, -1.0, 1.0)
    if kind is EffectKind.IPC_JACCARD:
        size_s, size_r = table.ipc_size[s], table.ipc_size[r]
        if (size_s == 0).any() or (size_r == 0).any():
            raise EmptyClassSet("IPC effect enabled but a node has no classes")
        inter = np.asarray(table.ipc[s].multiply(table.ipc[r]).sum(axis=1)).ravel()
        return inter / (size_s + size_r - inter)
    raise ValueError(f"{kind} is time-varying")


def _stream(table: NodeTable, r, t):
    """Single forward pass over events merged with sorted queries."""
    r = np.asarray(r, dtype=np.int64)
    t = np.asarray(t, dtype=np.int64)
    if len(t) > 1 and (np.diff(t) < 0).any():
        raise UnsortedQueries("queries must be sorted by time")
    indeg = np.zeros(len(table.ids), dtype=np.int64)
    last = np.full(len(table.ids), np.iinfo(np.int64).min)
    counts = np.empty(len(r), dtype=np.int64)
    gaps = np.empty(len(r), dtype=np.int64)
    ev_r = table.receiver.tolist()
    ev_t = table.time.tolist()
    n_ev = len(ev_t)
    j = 0
    for q, (rq, tq) in enumerate(zip(r.tolist(), t.tolist())):
        while j < n_ev and ev_t[j] < tq:
            indeg[ev_r[j]] += 1
            last[ev_r[j]] = ev_t[j]
            j += 1
        counts[q] = indeg[rq]
        # never cited: time since the receiver entered the network
        ref = last[rq] if indeg[rq] else table.pub_date[rq]
        gaps[q] = tq - ref
    return counts, gaps


def stream_time_varying(log: EventLog, queries: Sequence[tuple]) -> list[tuple[int, int]]:
    """(cumulative citations, time from last citation) for each ``(r, t)`` query.

    Only events strictly before the query time count. Never-cited receivers
    report ``t - pub_date(r)`` as their time from last event.
    """
    table = log.table
    try:
        r = [table.index[q[0]] for q in queries]
    except KeyError as exc:
        raise UnknownNode(exc.args[0]) from None
    counts, gaps = _stream(table, r, [q[1] for q in queries])
    return list(zip(counts.tolist(), gaps.tolist()))


def brute_force_time_varying(log: EventLog, r, t) -> tuple[int, int]:
    """O(n) rescan of the log for one query; test oracle for the streaming pass."""
    times = [e.time for e in log.events if e.receiver == r and e.time < t]
    if not times:
        return 0, t - log.attributes[r].pub_date
    return len(times), t - max(times)


def statistics_matrix(table: NodeTable, kinds, s, r, t) -> np.ndarray:
    """Raw (untransformed) statistics, one column per kind, rows sorted by ``t``."""
    s = np.asarray(s, dtype=np.int64)
    r = np.asarray(r, dtype=np.int64)
    out = np.empty((len(s), len(kinds)))
    tv = None
    for k, kind in enumerate(kinds):
        if kind.time_varying:
            if tv is None:
                tv = _stream(table, r, t)
            out[:, k] = tv[0] if kind is EffectKind.CUMULATIVE_CITATIONS else tv[1]
        else:
            out[:, k] = fixed_statistic(table, kind, s, r)
    return out


@dataclass
class CaseControlData:
    """Raw covariates of each event's case and its sampled control.

    ``case`` and ``control`` are (n, q) arrays with columns ordered as
    ``kinds``; ``at_risk`` holds the risk-set size n(t_i) of every event.
    """

    kinds: tuple
    case: np.ndarray
    control: np.ndarray
    time: np.ndarray
    at_risk: np.ndarray
    event_index: np.ndarray
    control_node: np.ndarray

    def __len__(self):
        return len(self.time)

    def column(self, kind) -> int:
        return self.kinds.index(kind)

    def subset(self, idx) -> "CaseControlData":
        idx = np.asarray(idx)
        return CaseControlData(
            self.kinds,
            self.case[idx],
            self.control[idx],
            self.time[idx],
            self.at_risk[idx],
            self.event_index[idx],
            self.control_node[idx],
        )

    def select(self, kinds) -> "CaseControlData":
        cols = [self.column(k) for k in kinds]
        return CaseControlData(
            tuple(kinds),
            self.case[:, cols],
            self.control[:, cols],
            self.time,
            self.at_risk,
            self.event_index,
            self.control_node,
        )


def build_case_control(log: EventLog, controls, kinds) -> CaseControlData:
    """Assemble case/control covariates for events with a sampled control."""
    from .sampler import risk_set_sizes

    table = log.table
    kinds = tuple(EffectKind.parse(k) if isinstance(k, str) else k for k in kinds)
    ev = np.array([c.event_index for c in controls], dtype=np.int64)
    ctrl = np.array([table.index[c.control] for c in controls], dtype=np.int64)
    s = table.sender[ev]
    t = table.time[ev]
    case = statistics_matrix(table, kinds, s, table.receiver[ev], t)
    control = statistics_matrix(table, kinds, s, ctrl, t)
    return CaseControlData(kinds, case, control, t, risk_set_sizes(log, t), ev, ctrl)


COVARIATE_HEADER = ["event_index", "role", "effect", "value"]


def write_covariate_cache(data: CaseControlData, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(COVARIATE_HEADER)
        for role, block in (("case", data.case), ("control", data.control)):
            for i, ev in enumerate(data.event_index.tolist()):
                for k, kind in enumerate(data.kinds):
                    w.writerow([ev, role, kind.value, repr(float(block[i, k]))])


def read_covariate_cache(path, log: EventLog, controls) -> CaseControlData:
    """Rebuild ``CaseControlData`` from a cache file written for ``controls``."""
    from .sampler import risk_set_sizes

    values: dict[tuple, float] = {}
    kinds: list[EffectKind] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        if next(reader, None) != COVARIATE_HEADER:
            raise MalformedRow(path, 1, "bad covariate cache header")
        for line, row in enumerate(reader, start=2):
            try:
                kind = EffectKind(row[2])
                values[(int(row[0]), row[1], kind)] = float(row[3])
            except (ValueError, IndexError) as exc:
                raise MalformedRow(path, line, str(exc)) from None
            if kind not in kinds:
                kinds.append(kind)
    table = log.table
    ev = np.array([c.event_index for c in controls], dtype=np.int64)
    ctrl = np.array([table.index[c.control] for c in controls], dtype=np.int64)
    case = np.array([[values[(e, "case", k)] for k in kinds] for e in ev.tolist()]).reshape(len(ev), len(kinds))
    control = np.array([[values[(e, "control", k)] for k in kinds] for e in ev.tolist()]).reshape(len(ev), len(kinds))
    t = table.time[ev]
    return CaseControlData(tuple(kinds), case, control, t, risk_set_sizes(log, t), ev, ctrl)
