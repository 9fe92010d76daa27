"""
One control per citation
========================

Each citation is paired with one patent that was already published and that
the sender did not cite. Draws come from a per-event counter-based stream, so
any subset of events can be re-sampled and gives the same controls.
"""

from collections import Counter

from stream_rem import Event, NodeAttributes, make_event_log, risk_set_size, sample_controls


def patent(name, day):
    return NodeAttributes(name, day, frozenset({"A01B"}), None, 0)


attrs = [patent(f"r{i}", i) for i in range(6)] + [patent("s", 50)]
log = make_event_log([Event("s", "r1", 50), Event("s", "r4", 50)], attrs)
print("risk set on day 50:", risk_set_size(log, 50))

counts = Counter(sample_controls(log, seed, events=[0])[0].control for seed in range(20000))
for name, n in sorted(counts.items()):
    print(f"{name}: {n / 20000:.3f}")
# r1 and r4 are cited by s and never drawn; the rest are near 1/4 each
