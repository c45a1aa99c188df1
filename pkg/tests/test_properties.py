"""Randomised invariants over whole runs."""

from hypothesis import HealthCheck, given, settings, strategies as st

from cpsnap import events as ev
from cpsnap.checker import check_rollback, check_snapshot
from cpsnap.sim import RollbackPlan, Scenario, WorkloadConfig

from conftest import run

scenarios = st.builds(
    Scenario,
    n=st.integers(2, 24),
    comm_prob=st.sampled_from([0.05, 0.1, 0.2, 0.4]),
    init_prob=st.sampled_from([0.05, 0.1, 0.2, 0.5]),
    seed=st.integers(0, 10**6),
    workload=st.builds(
        WorkloadConfig,
        enabled=st.just(True),
        app_send_prob=st.sampled_from([0.1, 0.3]),
        active_rounds=st.just((1, 30)),
        warmup_rounds=st.integers(0, 6),
    ),
)
fast = settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@given(scenarios)
@fast
def test_cps_snapshots_are_consistent(sc):
    r = run(sc)
    assert check_snapshot(r.log, "cps").passed


@given(scenarios)
@fast
def test_css_snapshots_are_consistent(sc):
    r = run(sc, "css")
    assert check_snapshot(r.log, "css").passed


@given(scenarios)
@fast
def test_every_instance_terminates_or_cancels(sc):
    r = run(sc)
    for node in r.nodes.values():
        assert node.init is None and node.idle
    taken = {(e.node, e.data[0]) for e in r.log.of_type(ev.CHECKPOINT)}
    closed = {(e.node, e.data[0]) for e in r.log.of_type(ev.TERMINATED, ev.CANCEL)}
    assert taken == closed


@given(scenarios)
@fast
def test_phase2_implies_a_determined_group(sc):
    r = run(sc)
    det = {e.node for e in r.log.of_type(ev.DETERMINED)}
    assert {e.node for e in r.log.of_type(ev.PHASE2_IN)} <= det
    assert {e.node for e in r.log.of_type(ev.PHASE2_OUT)} <= det


@given(scenarios)
@fast
def test_group_count_and_determinism(sc):
    a, b = run(sc, trace=True), run(sc, trace=True)
    assert list(a.trace_lines(sc, "cps")) == list(b.trace_lines(sc, "cps"))
    assert a.metrics.group_count == run(sc, "css").metrics.group_count == len(a.initiators)


@given(scenarios)
@fast
def test_rollback_restores_the_snapshot(sc):
    sc.rollback = RollbackPlan()
    r = run(sc)
    cps = {i: n.checkpoint for i, n in r.nodes.items()}
    assert check_rollback(r.log, cps).passed
