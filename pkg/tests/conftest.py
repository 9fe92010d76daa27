import numpy as np
import pytest

from stream_rem.covariates import EffectKind as K
from stream_rem.data_model import Event, NodeAttributes, make_event_log
from stream_rem.synthgen import Curve, SynthConfig, generate


def node(name, day, ipc=("A01B",), emb=None, outdeg=0):
    return NodeAttributes(name, day, frozenset(ipc), emb, outdeg)


@pytest.fixture
def tiny_log():
    """Four patents, three citations, all invariants satisfied."""
    attrs = [
        node("a", 100, outdeg=0, emb=(1.0, 0.0)),
        node("b", 200, ipc=("A01B", "C02F"), outdeg=1, emb=(0.6, 0.8)),
        node("c", 300, ipc=("C02F", "D03G"), outdeg=2, emb=(0.0, 1.0)),
        node("d", 300, outdeg=0, emb=(0.8, 0.6)),
    ]
    events = [Event("b", "a", 200), Event("c", "a", 300), Event("c", "b", 300)]
    return make_event_log(events, attrs)


@pytest.fixture(scope="session")
def synth_small():
    cfg = SynthConfig(
        n_patents=400,
        arrivals=4.0,
        cites_per_patent=3,
        seed=11,
        true_effects=((K.TIME_LAG, Curve.linear(-0.01)), (K.TEXTUAL_SIMILARITY, Curve.linear(1.0))),
    )
    return generate(cfg)


def random_log(rng, n_nodes=60, max_cites=4, days=40):
    """Valid random log: each node cites up to ``max_cites`` earlier nodes."""
    pub = np.sort(rng.integers(0, days, size=n_nodes))
    attrs, events = [], []
    for i in range(n_nodes):
        earlier = np.flatnonzero(pub < pub[i])
        k = min(len(earlier), int(rng.integers(0, max_cites + 1)))
        cited = rng.choice(earlier, size=k, replace=False) if k else []
        for j in cited:
            events.append(Event(f"n{i}", f"n{j}", int(pub[i])))
        attrs.append(node(f"n{i}", int(pub[i]), outdeg=k))
    return make_event_log(events, attrs)


@pytest.fixture(scope="session")
def cc_small(synth_small):
    """Case-control rows for ``synth_small`` with the generating effects."""
    from stream_rem.covariates import build_case_control
    from stream_rem.sampler import sample_controls

    log, _ = synth_small
    return build_case_control(log, sample_controls(log, seed=1), [K.TIME_LAG, K.TEXTUAL_SIMILARITY])


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
