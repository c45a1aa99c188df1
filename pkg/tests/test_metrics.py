import pytest

from cpsnap import events as ev
from cpsnap.events import EventLog
from cpsnap.messages import InstanceId, Kind, MessageCategory
from cpsnap.metrics import (
    RunMetrics, graph_diameter, initiator_network_stats, top_k_load, top_k_share, tree_depth,
)


def test_count_splits_app_from_protocol_messages():
    m = RunMetrics()
    m.count(MessageCategory.APPLICATION, Kind.APP.value)
    m.count(MessageCategory.MARKER, Kind.MARKER.value)
    m.count(MessageCategory.COLLISION, Kind.LINK.value)
    assert (m.app_messages, m.total_messages) == (1, 2)
    assert sum(m.messages_by_category.values()) == m.total_messages
    assert m.messages_by_kind == {"Marker": 1, "Link": 1}


def test_top_k_is_descending_and_clamped():
    m = RunMetrics(per_node_processed={0: 5, 1: 9, 2: 9, 3: 1})
    assert top_k_load(m, 2) == [(1, 9), (2, 9)]
    assert len(top_k_load(m, 10)) == 4
    assert top_k_share(m, 2) == pytest.approx(18 / 24)
    with pytest.raises(ValueError):
        top_k_load(m, 0)


def test_graph_diameter():
    assert graph_diameter({}) == 0
    assert graph_diameter({0: []}) == 0
    path = {0: [1], 1: [0, 2], 2: [1, 3], 3: [2]}
    assert graph_diameter(path) == 3


def test_tree_depth_counts_levels():
    assert tree_depth({}) == 0
    assert tree_depth({1: 0, 2: 1, 3: 2, 4: 3}) == 5
    with pytest.raises(ValueError):
        tree_depth({1: 2, 2: 1})


def test_clique_of_sixteen_plus_pendant_has_diameter_two():
    log = EventLog()
    for i in range(16):
        nbrs = tuple(j for j in range(16) if j != i) + ((16,) if i == 0 else ())
        log.record(1, i, ev.PHASE2_OUT, InstanceId(i), nbrs)
    log.record(1, 16, ev.PHASE2_OUT, InstanceId(16), (0,))
    assert initiator_network_stats(log, "cps")[0] == 2


def test_single_initiator_network_has_size_zero():
    log = EventLog()
    log.record(1, 4, ev.PHASE2_OUT, InstanceId(4), ())
    assert initiator_network_stats(log, "cps")[0] == 0
    assert initiator_network_stats(EventLog(), "css")[0] == 0


def test_css_tree_of_depth_five():
    log = EventLog()
    for child, parent in [(33, 0), (40, 33), (50, 40), (171, 50), (173, 50), (7, 0)]:
        log.record(1, child, ev.SUBORDINATED, InstanceId(child), parent)
    assert initiator_network_stats(log, "css")[0] == 5


def test_unknown_algorithm():
    with pytest.raises(ValueError):
        initiator_network_stats(EventLog(), "x")
