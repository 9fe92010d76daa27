"""
Time-varying receiver statistics
================================

Cumulative citations received and time since the last citation are computed
for a batch of (receiver, day) queries in one forward pass over the log.
Citations made on the query day itself are not yet visible.
"""

from stream_rem import Event, NodeAttributes, make_event_log, stream_time_varying


def patent(name, day):
    return NodeAttributes(name, day, frozenset({"A01B"}), None, 0)


attrs = [patent("r", 0), patent("x", 100), patent("y", 150), patent("z", 160), patent("q", 10)]
log = make_event_log([Event("x", "r", 100), Event("y", "r", 150), Event("z", "r", 160)], attrs)

queries = [("r", 100), ("r", 150), ("r", 160), ("r", 161), ("q", 500)]
for (node, day), (count, gap) in zip(queries, stream_time_varying(log, queries)):
    print(f"{node} on day {day}: {count} citations so far, {gap} days since the last one")

# q was never cited, so its recency is measured from its own publication date
