from cpsnap import events as ev
from cpsnap.checker import check_snapshot
from cpsnap.css import CssNode, GroupState
from cpsnap.messages import InstanceId, Kind, MessageCategory
from cpsnap.metrics import initiator_network_stats, tree_depth
from cpsnap.sim import Scenario

from conftest import busy, run, run_edges


class Net:
    """Round-by-round delivery between hand-configured CSS nodes."""

    def __init__(self, ids):
        self.nodes = {i: CssNode(i) for i in ids}
        self.rounds = 0
        self.delivered = []

    def collect(self):
        out = []
        for i in sorted(self.nodes):
            out += self.nodes[i].drain()
        return out

    def settle(self, limit=100):
        pending = self.collect()
        while pending:
            self.rounds += 1
            assert self.rounds <= limit
            for env in sorted(pending, key=lambda e: (e.dest, e.sender)):
                self.delivered.append(env)
                if env.dest in self.nodes:  # nodes outside the net just swallow it
                    self.nodes[env.dest].deliver(env)
            pending = self.collect()


def chain_tree(net, main, chain, leaves):
    """main <- chain[0] <- ... <- chain[-1] <- each leaf; all are initiators."""
    net.nodes[main].start_role(InstanceId(main))
    parent = main
    for k in list(chain) + list(leaves):
        node = net.nodes[k]
        node.start_role(InstanceId(k))
        node.parent = parent
        node.group = GroupState()
        if k in chain:
            parent = k
    return net


def test_worst_case_collision_costs_twelve_messages_and_rounds():
    # tree of depth five: 0 <- 33 <- 40 <- 50 <- {171, 173}
    x, y = 500, 600  # x is in 171's group, y in 173's
    net = chain_tree(Net([0, 33, 40, 50, 171, 173, x, y]), 0, [33, 40, 50], [171, 173])
    net.nodes[0].group.tree |= {InstanceId(i) for i in (33, 40, 50, 171, 173)}
    net.nodes[x].init = InstanceId(171)
    net.nodes[y].init = InstanceId(173)
    net.nodes[x].report_collision(y, InstanceId(173))
    net.settle()
    assert len(net.delivered) == 12
    assert net.rounds == 12
    kinds = [e.kind for e in net.delivered]
    assert kinds.count(Kind.NEWINIT) == 5 and kinds.count(Kind.ACCEPT) == 1 and kinds.count(Kind.CSS_COMBINE) == 6
    assert net.nodes[0].group.busy is None
    parent = {i: n.parent for i, n in net.nodes.items() if n.parent is not None}
    assert tree_depth(parent) == 5


def test_newinit_at_a_depth_four_initiator_is_forwarded_four_times():
    net = chain_tree(Net([0, 1, 2, 3, 4, 9]), 0, [1, 2, 3], [4])
    net.nodes[9].init = InstanceId(4)
    net.nodes[9].report_collision(8, InstanceId(8))
    net.nodes[0].group.busy = ("held", 1)  # keep the main busy so only forwarding shows
    net.settle()
    relays = [e for e in net.delivered if e.kind is Kind.NEWINIT and e.forwarded]
    assert len(relays) == 4
    assert all(e.category is MessageCategory.INITIATOR_NETWORK for e in relays)
    assert len(net.nodes[0].group.queue) == 1


def test_dsinfo_at_a_depth_two_sub_initiator_is_forwarded_twice():
    net = chain_tree(Net([0, 1, 2, 7]), 0, [1], [2])
    net.nodes[0].group.tree |= {InstanceId(1), InstanceId(2)}
    net.nodes[7].send(2, Kind.CSS_DSINFO, InstanceId(2), frozenset({3}), 7)
    net.settle()
    hops = [e for e in net.delivered if e.kind is Kind.CSS_DSINFO and e.forwarded]
    assert [(e.sender, e.dest) for e in hops] == [(2, 1), (1, 0)]
    assert 7 in net.nodes[0].group.MkFrom


def test_stale_dsinfo_gets_out():
    net = Net([0, 7])
    net.nodes[0].start_role(InstanceId(0))
    net.nodes[0].decided = True
    net.nodes[7].init = InstanceId(0)
    net.nodes[7].send(0, Kind.CSS_DSINFO, InstanceId(0), frozenset(), 7)
    net.settle()
    assert [e.kind for e in net.delivered] == [Kind.CSS_DSINFO, Kind.OUT]


def test_busy_main_queues_collisions_in_arrival_order():
    net = Net([0, 5, 6])
    main = net.nodes[0]
    main.start_role(InstanceId(0))
    for px in (5, 6):
        net.nodes[px].init = InstanceId(0)
        net.nodes[px].report_collision(9, InstanceId(9))
    net.settle()
    accepts = [e for e in net.delivered if e.kind is Kind.ACCEPT]
    assert [e.dest for e in accepts] == [5]
    assert [q[0] for q in main.group.queue] == [6]


def test_larger_main_joins_the_smaller_one():
    r = run_edges(7, [(0, 3), (3, 4), (4, 5), (5, 6)], [0, 6], "css")
    subs = [(e.node, e.data[1]) for e in r.log.of_type(ev.SUBORDINATED)]
    assert subs == [(6, 0)]
    assert check_snapshot(r.log, "css").passed


def test_self_merge_answers_with_initinfo():
    net = Net([0])
    main = net.nodes[0]
    main.start_role(InstanceId(0))
    main.group.busy = tok = (0, 1)
    main.on_combine(tok, 0, InstanceId(0))
    main._flush_local()
    assert main.group.busy is None
    assert main.parent is None


def test_single_group_membership_matches_cps():
    for seed in range(5):
        sc = Scenario(30, 0.1, 0.0, seed, initiators_override=[seed])
        a, b = run(sc, "cps"), run(sc, "css")
        own = lambda r: {i: n.checkpoint.instance for i, n in r.nodes.items() if n.checkpoint}
        assert own(a) == own(b)


def test_css_runs_are_consistent():
    for seed in range(8):
        r = run(Scenario(25, 0.1, 0.2, seed, busy()), "css")
        assert check_snapshot(r.log, "css").passed


def test_only_css_kinds_are_counted():
    r = run(Scenario(40, 0.15, 0.2, 1), "css")
    for kind in ("Link", "Ack", "Deny", "Check", "LocalTerm", "GlobalTerm", "MyDS", "MkSources"):
        assert kind not in r.metrics.messages_by_kind


def test_css_tree_depth_metric():
    r = run(Scenario(80, 0.1, 0.15, 3), "css")
    size, parent = initiator_network_stats(r.log, "css")
    assert size >= 2 and parent
