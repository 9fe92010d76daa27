import dataclasses

import pytest

from stream_rem.data_model import (
    Event,
    EventLog,
    date_to_days,
    load_event_log,
    make_event_log,
    read_event_log,
    validate,
    write_event_log,
)
from stream_rem.exceptions import DuplicateDyad, MalformedRow, MissingAttribute, TimeViolation

from conftest import node


def write(tmp_path, events, attrs):
    ev = tmp_path / "events.csv"
    at = tmp_path / "attributes.csv"
    ev.write_text("sender,receiver,time\n" + "".join(f"{r}\n" for r in events))
    at.write_text("node,pub_date,ipc_classes,embedding,outdegree\n" + "".join(f"{r}\n" for r in attrs))
    return ev, at


ATTRS = [
    "a,1970-01-02,A01B,1.0;0.0,0",
    "b,1970-01-05,A01B;C02F,0.6;0.8,1",
    "c,1970-01-09,C02F,,2",
    "d,1970-02-01,C02F,,0",
]


def test_load_three_events(tmp_path):
    ev, at = write(tmp_path, ["c,a,1970-01-09", "b,a,1970-01-05", "c,b,1970-01-09"], ATTRS)
    log = load_event_log(ev, at)
    assert len(log) == 3
    assert log.n_nodes == 4
    assert [e.time for e in log.events] == [4, 8, 8]
    assert log.attributes["b"].embedding == (0.6, 0.8)
    assert log.attributes["c"].embedding is None
    assert log.attributes["b"].ipc_classes == frozenset({"A01B", "C02F"})


def test_missing_attribute_names_node(tmp_path):
    ev, at = write(tmp_path, ["b,zz,1970-01-05"], ATTRS)
    with pytest.raises(MissingAttribute, match="zz"):
        load_event_log(ev, at)


def test_time_violation(tmp_path):
    # receiver published day 200 cited on day 100
    attrs = ["s,1970-04-11,A,,1", "r,1970-07-20,A,,0"]
    ev, at = write(tmp_path, ["s,r,1970-04-11"], attrs)
    assert date_to_days("1970-04-11") == 100
    with pytest.raises(TimeViolation):
        load_event_log(ev, at)


def test_same_day_receiver_not_at_risk(tmp_path):
    ev, at = write(tmp_path, ["c,d,1970-01-09"], ATTRS[:3] + ["d,1970-01-09,C02F,,0"])
    with pytest.raises(TimeViolation):
        load_event_log(ev, at)


def test_duplicate_dyad_rejected(tmp_path):
    ev, at = write(tmp_path, ["b,a,1970-01-05", "b,a,1970-01-05"], ATTRS)
    with pytest.raises(DuplicateDyad):
        load_event_log(ev, at)


@pytest.mark.parametrize(
    "row, line",
    [("b,a,notadate", 3), ("b,a", 3), ("b,a,1970-01-05,x", 3)],
)
def test_malformed_row_reports_line(tmp_path, row, line):
    ev, at = write(tmp_path, ["c,a,1970-01-09", row], ATTRS)
    with pytest.raises(MalformedRow) as info:
        load_event_log(ev, at)
    assert info.value.line == line


def test_bad_embedding_norm(tmp_path):
    ev, at = write(tmp_path, [], ["a,1970-01-02,A01B,0.5;0.5,0"])
    with pytest.raises(MalformedRow):
        load_event_log(ev, at)


def test_validate_clean(tiny_log):
    assert validate(tiny_log) == []


def test_validate_duplicate(tiny_log):
    log = EventLog(tiny_log.events + (Event("c", "b", 300),), tiny_log.attributes)
    report = validate(log)
    assert [v.kind for v in report] == ["DuplicateDyad"]
    assert report[0].event_index == 3


def test_validate_unsorted(tiny_log):
    e = tiny_log.events
    log = EventLog((e[1], e[0], e[2]), tiny_log.attributes)
    kinds = [v.kind for v in validate(log)]
    assert kinds == ["OrderingViolation"]


def test_lenient_read_drops_bad_events(tmp_path):
    ev, at = write(tmp_path, ["b,a,1970-01-05", "a,b,1970-01-02"], ATTRS)
    log, report = read_event_log(ev, at, drop_invalid=True)
    assert len(log) == 1
    assert [(v.kind, v.line) for v in report] == [("TimeViolation", 3)]
    assert log.events == (Event("b", "a", 4),)


def test_round_trip(tmp_path, tiny_log):
    ev, at = tmp_path / "e.csv", tmp_path / "a.csv"
    write_event_log(tiny_log, ev, at)
    again = load_event_log(ev, at)
    assert again.events == tiny_log.events
    assert dict(again.attributes) == dict(tiny_log.attributes)


def test_round_trip_synthetic(tmp_path, synth_small):
    log, _ = synth_small
    ev, at = tmp_path / "e.csv", tmp_path / "a.csv"
    write_event_log(log, ev, at)
    again = load_event_log(ev, at)
    assert again.events == log.events
    for k, a in log.attributes.items():
        assert dataclasses.astuple(again.attributes[k]) == dataclasses.astuple(a)


def test_stable_sort():
    attrs = [node("a", 0), node("b", 0), node("s", 5), node("t", 5), node("u", 3)]
    events = [Event("s", "a", 5), Event("t", "b", 5), Event("u", "a", 3), Event("s", "b", 5)]
    log = make_event_log(events, attrs)
    assert log.events == (events[2], events[0], events[1], events[3])
