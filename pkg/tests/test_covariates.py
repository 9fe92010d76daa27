import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stream_rem.covariates import (
    EffectKind as K,
    brute_force_time_varying,
    count_outdegrees,
    fixed_statistic,
    ipc_jaccard,
    parse_effects,
    receiver_outdegree,
    receiver_pub_year,
    stream_time_varying,
    textual_similarity,
    time_lag,
)
from stream_rem.data_model import Event, EventLog, date_to_days, make_event_log
from stream_rem.exceptions import EmptyClassSet, MissingEmbedding, UnknownNode, UnsortedQueries

from conftest import node, random_log


def attrs_of(*nodes):
    return {n.node: n for n in nodes}


def test_pub_year():
    attrs = attrs_of(node("x", date_to_days("2000-01-01")), node("y", date_to_days("1976-07-02")))
    assert receiver_pub_year("x", attrs) == pytest.approx(2000.0, abs=0.01)
    assert receiver_pub_year("y", attrs) == pytest.approx(1976.5, abs=0.01)
    with pytest.raises(UnknownNode):
        receiver_pub_year("nope", attrs)


@pytest.mark.parametrize("ds, dr, lag", [(1000, 900, 100), (900, 900, 0), (3500, 1000, 2500)])
def test_time_lag(ds, dr, lag):
    attrs = attrs_of(node("s", ds), node("r", dr))
    assert time_lag("s", "r", attrs) == lag


def test_outdegree():
    attrs = attrs_of(node("a", 0, outdeg=3), node("b", 0, outdeg=0))
    assert receiver_outdegree("a", attrs) == 3
    assert receiver_outdegree("b", attrs) == 0


def test_outdegree_matches_recount(synth_small):
    log, _ = synth_small
    counts = count_outdegrees(log)
    brute = {n: sum(1 for e in log.events if e.sender == n) for n in log.attributes}
    assert counts == brute
    assert all(receiver_outdegree(n, log.attributes) == brute[n] for n in log.attributes)


def test_textual_similarity():
    attrs = attrs_of(
        node("a", 0, emb=(0.6, 0.8)), node("b", 0, emb=(1.0, 0.0)), node("c", 0, emb=(0.0, 1.0)),
        node("z", 0),
    )
    assert textual_similarity("a", "a", attrs) == pytest.approx(1.0, abs=1e-9)
    assert textual_similarity("b", "c", attrs) == pytest.approx(0.0, abs=1e-9)
    assert textual_similarity("a", "b", attrs) == pytest.approx(0.6, abs=1e-9)
    with pytest.raises(MissingEmbedding):
        textual_similarity("a", "z", attrs)


def test_ipc_jaccard():
    attrs = attrs_of(
        node("a", 0, ipc=("A01B",)), node("b", 0, ipc=("C02F",)),
        node("c", 0, ipc=("A01B", "C02F")), node("d", 0, ipc=("C02F", "D03G")), node("e", 0, ipc=()),
    )
    assert ipc_jaccard("a", "a", attrs) == 1.0
    assert ipc_jaccard("a", "b", attrs) == 0.0
    assert ipc_jaccard("c", "d", attrs) == pytest.approx(1 / 3)
    with pytest.raises(EmptyClassSet):
        ipc_jaccard("a", "e", attrs)


@settings(max_examples=50, deadline=None)
@given(
    st.frozensets(st.sampled_from("ABCDEF"), min_size=1),
    st.frozensets(st.sampled_from("ABCDEF"), min_size=1),
    st.lists(st.floats(-1, 1), min_size=3, max_size=3),
    st.lists(st.floats(-1, 1), min_size=3, max_size=3),
)
def test_symmetry(a, b, u, v):
    u, v = np.array(u), np.array(v)
    if np.linalg.norm(u) < 1e-3 or np.linalg.norm(v) < 1e-3:
        return
    attrs = attrs_of(
        node("s", 0, ipc=a, emb=tuple(u / np.linalg.norm(u))),
        node("r", 0, ipc=b, emb=tuple(v / np.linalg.norm(v))),
    )
    assert ipc_jaccard("s", "r", attrs) == ipc_jaccard("r", "s", attrs)
    assert textual_similarity("s", "r", attrs) == pytest.approx(textual_similarity("r", "s", attrs), abs=1e-15)
    assert -1 <= textual_similarity("s", "r", attrs) <= 1


def test_vectorised_matches_scalar(synth_small):
    log, _ = synth_small
    t = log.table
    ev = log.events[:300]
    s = [t.index[e.sender] for e in ev]
    r = [t.index[e.receiver] for e in ev]
    scalar = {
        K.RECEIVER_PUB_YEAR: lambda e: receiver_pub_year(e.receiver, log.attributes),
        K.TIME_LAG: lambda e: time_lag(e.sender, e.receiver, log.attributes),
        K.RECEIVER_OUTDEGREE: lambda e: receiver_outdegree(e.receiver, log.attributes),
        K.TEXTUAL_SIMILARITY: lambda e: textual_similarity(e.sender, e.receiver, log.attributes),
        K.IPC_JACCARD: lambda e: ipc_jaccard(e.sender, e.receiver, log.attributes),
    }
    for kind, fn in scalar.items():
        np.testing.assert_allclose(fixed_statistic(t, kind, s, r), [fn(e) for e in ev], rtol=0, atol=1e-12)


def test_stream_example():
    attrs = [node("r", 0), node("x", 100), node("y", 150), node("q", 10)]
    log = make_event_log([Event("x", "r", 100), Event("y", "r", 150)], attrs)
    assert stream_time_varying(log, [("r", 160)]) == [(2, 10)]
    assert stream_time_varying(log, [("q", 500)]) == [(0, 490)]
    # same-day citations are not yet visible
    assert stream_time_varying(log, [("r", 150)]) == [(1, 50)]


def test_unsorted_queries(tiny_log):
    with pytest.raises(UnsortedQueries):
        stream_time_varying(tiny_log, [("a", 300), ("a", 200)])


def big_random_log(seed, n_nodes=3000, max_cites=6, days=2000):
    return random_log(np.random.default_rng(seed), n_nodes=n_nodes, max_cites=max_cites, days=days)


def test_stream_matches_brute_force_10k():
    log = big_random_log(5, n_nodes=3400)
    assert len(log) >= 9000
    rng = np.random.default_rng(1)
    ids = list(log.attributes)
    q_nodes = rng.choice(len(ids), size=1000)
    q_times = np.sort(rng.integers(0, 2100, size=1000))
    queries = [(ids[i], int(t)) for i, t in zip(q_nodes, q_times)]
    got = stream_time_varying(log, queries)
    by_receiver = {}
    for e in log.events:
        by_receiver.setdefault(e.receiver, []).append(e.time)
    for (r, t), (count, gap) in zip(queries, got):
        times = [x for x in by_receiver.get(r, []) if x < t]
        assert count == len(times)
        assert gap == (t - max(times) if times else t - log.attributes[r].pub_date)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 60))
def test_causality_and_monotonicity(seed, cut):
    rng = np.random.default_rng(seed)
    log = random_log(rng, n_nodes=50, days=60)
    ids = list(log.attributes)
    r = ids[int(rng.integers(len(ids)))]
    base = stream_time_varying(log, [(r, cut)])
    truncated = EventLog(tuple(e for e in log.events if e.time < cut), log.attributes)
    assert stream_time_varying(truncated, [(r, cut)]) == base
    counts = [c for c, _ in stream_time_varying(log, [(r, t) for t in range(0, 70, 3)])]
    assert counts == sorted(counts)
    assert base[0] == tuple(brute_force_time_varying(log, r, cut))


def test_parse_effects():
    assert parse_effects("nodal") == (K.RECEIVER_PUB_YEAR, K.TIME_LAG, K.RECEIVER_OUTDEGREE)
    assert parse_effects("time_lag,similarity") == (K.TIME_LAG, K.TEXTUAL_SIMILARITY, K.IPC_JACCARD)
    assert K.CUMULATIVE_CITATIONS.time_varying and not K.TIME_LAG.time_varying
    assert K.RECEIVER_OUTDEGREE.default_transform == "log1p"
