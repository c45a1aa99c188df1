import pytest
from hypothesis import given, strategies as st

from cpsnap.messages import (
    AppState, Envelope, InstanceId, Kind, MessageCategory, classify, fold_digest,
)


def test_instance_ids_order_by_initiator_then_sequence():
    assert InstanceId(1, 5) < InstanceId(2, 0)
    assert InstanceId(2, 0) < InstanceId(2, 1)
    assert InstanceId.from_json(InstanceId(3, 4).to_json()) == InstanceId(3, 4)


def test_every_kind_has_a_category():
    for k in Kind:
        assert isinstance(classify(k), MessageCategory)


def test_forwarded_css_messages_are_charged_to_the_initiator_network():
    assert classify(Kind.NEWINIT) is MessageCategory.COLLISION
    assert classify(Kind.NEWINIT, forwarded=True) is MessageCategory.INITIATOR_NETWORK
    assert classify(Kind.CSS_DSINFO, forwarded=True) is MessageCategory.INITIATOR_NETWORK
    # CPS kinds are never relayed, so the flag changes nothing for them
    assert classify(Kind.LINK, forwarded=True) is MessageCategory.COLLISION


def test_categories_of_cps_kinds():
    assert classify(Kind.MARKER) is MessageCategory.MARKER
    assert classify(Kind.MYDS) is MessageCategory.NORMAL
    assert classify(Kind.CHECK) is MessageCategory.INITIATOR_NETWORK
    assert classify(Kind.APP) is MessageCategory.APPLICATION


def test_app_envelopes_carry_no_instance_and_protocol_ones_do():
    with pytest.raises(ValueError):
        Envelope(0, 1, Kind.APP, InstanceId(0), (1,))
    with pytest.raises(ValueError):
        Envelope(0, 1, Kind.MARKER, None, (0,))


leaves = st.integers(-5, 50) | st.booleans() | st.none() | st.builds(InstanceId, st.integers(0, 9), st.integers(0, 3))
payloads = st.one_of(
    leaves,
    st.frozensets(st.integers(0, 30), max_size=4),
    st.tuples(leaves, leaves),
    st.dictionaries(st.integers(0, 9), st.frozensets(st.integers(0, 9), max_size=3), max_size=3),
    st.lists(st.tuples(st.integers(0, 9), st.integers(0, 9)), max_size=3),
)


@given(st.lists(payloads, max_size=4), st.booleans(), st.integers(0, 100))
def test_envelope_json_round_trip(payload, forwarded, rnd):
    env = Envelope(1, 2, Kind.LINK, InstanceId(2, 1), tuple(payload), rnd, forwarded)
    assert Envelope.from_json(env.to_json()) == env


def test_app_state_tracks_counts_and_an_order_sensitive_digest():
    a = AppState().after_receive(1).after_receive(2).after_send()
    b = AppState().after_receive(2).after_receive(1).after_send()
    assert (a.sent, a.received) == (1, 2)
    assert a.digest != b.digest
    assert fold_digest(0, 0) == 1


def test_sets_of_instances_encode_in_a_stable_order():
    env = Envelope(0, 1, Kind.FIN, InstanceId(0), (frozenset({10, 2, 1}), frozenset({InstanceId(42), InstanceId(3, 1)})))
    assert '"set": [1, 2, 10]' in env.to_json()
    assert Envelope.from_json(env.to_json()) == env
