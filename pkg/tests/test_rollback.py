import pytest

from cpsnap import events as ev
from cpsnap.checker import check_rollback, check_snapshot
from cpsnap.cps import CpsNode
from cpsnap.messages import InstanceId, Kind
from cpsnap.node import InitiateRejected
from cpsnap.sim import RollbackPlan, Scenario, line_edges

from conftest import busy, run


def _rb(scenario):
    r = run(scenario)
    cps = {i: n.checkpoint for i, n in r.nodes.items()}
    return r, check_rollback(r.log, cps)


def test_isolated_node_rolls_back_alone():
    sc = Scenario(3, topology_override=[], initiators_override=[1], rollback=RollbackPlan(node=1))
    r, rep = _rb(sc)
    assert rep.passed
    assert [e.node for e in r.log.of_type(ev.RESTORED)] == [1]


def test_nodes_without_a_checkpoint_restore_the_initial_state():
    sc = Scenario(8, 0.4, 0.0, 3, busy(0.5, warmup=0), initiators_override=[], rollback=RollbackPlan(node=0))
    r = run(sc)
    assert r.metrics.app_messages > 0
    restored = r.log.of_type(ev.RESTORED)
    assert restored
    assert all(e.data[1] == (0, 0, 0) for e in restored)
    assert check_rollback(r.log).passed


def test_three_node_chain_restores_the_recorded_snapshot():
    sc = Scenario(3, topology_override=line_edges(3), initiators_override=[0], workload=busy(0.5), seed=2, rollback=RollbackPlan(node=0))
    r, rep = _rb(sc)
    assert rep.passed
    assert {e.node for e in r.log.of_type(ev.RESTORED)} == {0, 1, 2}
    for e in r.log.of_type(ev.RESTORED):
        cp = r.nodes[e.node].checkpoint
        assert e.data[1] == (cp.local_state.sent, cp.local_state.received, cp.local_state.digest)


def test_reinitiating_is_rejected():
    node = CpsNode(0)
    node.DS = {1}
    node.rb_initiate()
    with pytest.raises(InitiateRejected):
        node.rb_initiate()


def test_rbmarker_from_a_second_rollback_is_dropped():
    node = CpsNode(0)
    node.DS = {1}
    node.rb_initiate()
    node.on_rbmarker(5, InstanceId(5))
    drops = node.log.of_type(ev.DROPPED)
    assert drops and drops[-1].data == (Kind.RB_MARKER.value, 5, "concurrent rollback")
    assert node.rb_init == InstanceId(0)


def test_first_rbmarker_floods_over_ds():
    node = CpsNode(3)
    node.DS = {1, 4}
    node.on_rbmarker(9, InstanceId(9))
    out = node.drain()
    assert [(e.kind, e.dest) for e in out] == [(Kind.RB_MYDS, 9), (Kind.RB_MARKER, 1), (Kind.RB_MARKER, 4)]
    assert node.app_stopped


def test_stored_in_transit_messages_are_put_back_on_their_links():
    seen = 0
    for seed in range(40):
        sc = Scenario(12, 0.25, 0.2, seed, busy(0.4), rollback=RollbackPlan())
        r, rep = _rb(sc)
        assert rep.passed
        for e in r.log.of_type(ev.RESTORED):
            stored = [m for _s, m in r.nodes[e.node].checkpoint.in_transit] if r.nodes[e.node].checkpoint else []
            assert set(stored) <= set(e.data[2])
            seen += len(stored)
    assert seen > 0


def test_queued_messages_from_members_are_discarded():
    discarded = 0
    for seed in range(40):
        r, rep = _rb(Scenario(12, 0.25, 0.2, seed, busy(0.5, active=(1, 80)), rollback=RollbackPlan()))
        assert rep.passed
        discarded += len(r.log.of_type(ev.DISCARD))
    assert discarded > 0


def test_rollback_group_equals_the_snapshot_group_over_the_same_relation():
    for seed in range(10):
        snap = run(Scenario(25, 0.1, 0.0, seed, initiators_override=[seed]))
        back = run(Scenario(25, 0.1, 0.0, seed, initiators_override=[], rollback=RollbackPlan(node=seed)))
        assert {e.node for e in snap.log.of_type(ev.TERMINATED)} == {e.node for e in back.log.of_type(ev.RESTORED)}


def test_tampered_restore_is_caught():
    sc = Scenario(10, 0.3, 0.2, 1, busy(0.4), rollback=RollbackPlan())
    r = run(sc)
    assert check_snapshot(r.log).passed
    finals = {e.node: e.data[1] for e in r.log.of_type(ev.RESTORED)}
    victim = sorted(finals)[0]
    finals[victim] = (finals[victim][0] + 1, finals[victim][1], finals[victim][2])
    assert not check_rollback(r.log, final_states=finals).passed


def test_no_rollback_in_the_log_fails():
    r = run(Scenario(10, 0.3, 0.2, 1))
    assert not check_rollback(r.log).passed
