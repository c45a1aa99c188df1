"""CPS node: phase 1 group determination, collision links, phase 2 termination."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from . import events as ev
from .events import EventLog
from .messages import Envelope, InstanceId, Kind, NodeId
from .participant import Participant
from .rollback import RollbackMixin

INF = float("inf")


@dataclass
class Phase2State:
    rID: Optional[NodeId] = None
    dist: float = INF
    pID: Optional[NodeId] = None
    Child: set = field(default_factory=set)
    LT: set = field(default_factory=set)
    CK: set = field(default_factory=set)
    InPhase2: bool = False
    heard: dict = field(default_factory=dict)  # neighbour -> (rID, dist) of its last Check
    reported: bool = False  # LocalTerm sent for the current view


class CpsNode(RollbackMixin, Participant):
    def __init__(self, node_id: NodeId, log: Optional[EventLog] = None, hold_collided_links: bool = True):
        super().__init__(node_id, log, hold_collided_links)
        self.reset_role()
        self.init_rollback()

    def reset_role(self) -> None:
        self.MkFrom: set[NodeId] = set()
        self.MkTo: set[NodeId] = set()
        self.reported: dict[NodeId, frozenset] = {}  # member -> DS from its MyDS
        self.foreign: dict[NodeId, InstanceId] = {}  # linked non-member -> its instance
        self.DSInfo: dict[NodeId, set[NodeId]] = {}
        self.Wait: set[tuple[NodeId, NodeId, InstanceId]] = set()
        self.Nbrs: dict[NodeId, InstanceId] = {}
        self.p2 = Phase2State()
        self.p2_buffer: list[Envelope] = []

    # -- helpers ----------------------------------------------------------

    @property
    def is_initiator(self) -> bool:
        return self.init is not None and self.init.initiator == self.id

    @property
    def in_phase2(self) -> bool:
        return self.p2.InPhase2

    @property
    def idle(self) -> bool:
        return super().idle and self.rb_init is None

    def marker_suppressed(self) -> bool:
        return self.p2.InPhase2

    def _has_nbr(self, inst: InstanceId) -> bool:
        return self.Nbrs.get(inst.initiator) == inst

    def _add_dsinfo(self, node: NodeId, ds) -> None:
        self.DSInfo.setdefault(node, set()).update(ds)

    # -- participant hooks ------------------------------------------------

    def report_ds(self, inst: InstanceId, ds: frozenset) -> None:
        self.send(inst.initiator, Kind.MYDS, inst, ds)

    def report_collision(self, sender: NodeId, inst: InstanceId) -> None:
        self.send(self.init.initiator, Kind.NEWINIT, self.init, sender, inst)

    def termination_blocked(self) -> bool:
        # an initiator waits until its own phase 2 has finished
        return self.p2.InPhase2

    # -- dispatch ---------------------------------------------------------

    def dispatch(self, env: Envelope) -> None:
        k = env.kind
        if k is Kind.APP:
            if self.rb_init is not None:
                self.rb_queue_app(env)
            else:
                self.receive_app(env)
        elif k is Kind.MARKER:
            self.on_marker(env.sender, env.instance)
        elif k is Kind.MYDS:
            self.on_myds(env)
        elif k is Kind.OUT:
            self.on_out(env)
        elif k is Kind.FIN:
            self.on_fin(env)
        elif k is Kind.NEWINIT:
            self.on_newinit(env)
        elif k is Kind.LINK:
            self.on_link(env)
        elif k is Kind.ACK:
            self.on_ack(env)
        elif k is Kind.DENY:
            self.on_deny(env)
        elif k is Kind.ACCEPT:
            self.on_accept(env)
        elif k is Kind.MK_SOURCES:
            self.on_mk_sources(env)
        elif k in (Kind.CHECK, Kind.LOCALTERM, Kind.GLOBALTERM):
            self.on_phase2_message(env)
        else:
            self.dispatch_rollback(env)

    # -- phase 1 ----------------------------------------------------------

    def on_myds(self, env: Envelope) -> None:
        if env.instance != self.init or not self.is_initiator or self.fin:
            self.send(env.sender, Kind.OUT, env.instance)
            return
        ds = env.payload[0]
        self.MkFrom.add(env.sender)
        self.reported[env.sender] = ds
        self.MkTo.update(ds)
        self._add_dsinfo(env.sender, ds)
        self.can_determine_sg()

    def on_out(self, env: Envelope) -> None:
        if env.instance != self.init or self.is_initiator:
            self.record(ev.DROPPED, Kind.OUT.value, env.sender, "stale")
            return
        self.cancel()

    def on_fin(self, env: Envelope) -> None:
        if env.instance != self.init:
            self.record(ev.DROPPED, Kind.FIN.value, env.sender, "foreign instance")
            return
        self.accept_fin(env.payload[0])

    def can_determine_sg(self) -> None:
        if self.fin or not self.is_initiator:
            return
        if self.MkTo <= self.MkFrom and not self.Wait:
            self.fin = True
            self.record(ev.DETERMINED, self.init)
            self.send_mk_sources()
            self.start_phase2()

    def send_mk_sources(self) -> None:
        """Tell each linked initiator which of our members flood Markers to its members.

        Only we hold those members' DS, and the owner needs it to build their
        MkList. Sent ahead of our first Check, so it lands before the owner
        can leave phase 2 and send its Fins.
        """
        by_owner: dict[InstanceId, dict] = {}
        for f, owner in self.foreign.items():
            if f in self.reported:
                continue
            srcs = frozenset(x for x, ds in self.reported.items() if f in ds)
            if srcs:
                by_owner.setdefault(owner, {})[f] = srcs
        for owner in sorted(by_owner):
            self.send(owner.initiator, Kind.MK_SOURCES, owner, by_owner[owner])

    def on_mk_sources(self, env: Envelope) -> None:
        if env.instance != self.init or not self.is_initiator:
            self.record(ev.DROPPED, Kind.MK_SOURCES.value, env.sender, "stale")
            return
        for f, srcs in env.payload[0].items():
            for x in srcs:
                self._add_dsinfo(x, {f})

    # -- collision handling ----------------------------------------------

    def on_newinit(self, env: Envelope) -> None:
        if env.instance != self.init or not self.is_initiator:
            self.record(ev.DROPPED, Kind.NEWINIT.value, env.sender, "stale")
            return
        self.collisions_seen += 1
        px = env.sender
        py, b_inst = env.payload
        pb = b_inst.initiator
        ds_px = frozenset(self.reported.get(px, ()))
        if not self.fin:
            # px is sent an Accept either now or once the link is acked, so it marks py
            if not self._has_nbr(b_inst):
                self.Wait.add((px, py, b_inst))
                self.send(pb, Kind.LINK, b_inst, px, py, self.init, True, ds_px)
            else:
                self.MkTo.add(px)
                self._add_dsinfo(py, {px})
                self.send(pb, Kind.LINK, b_inst, px, py, self.init, True, ds_px)
                self.send(px, Kind.ACCEPT, self.init, py, b_inst)
                self.can_determine_sg()
        elif self._has_nbr(b_inst):
            self.send(pb, Kind.LINK, b_inst, px, py, self.init, py in ds_px, ds_px)

    def on_link(self, env: Envelope) -> None:
        px, py, a_inst, marks, ds_px = env.payload
        if env.instance != self.init or not self.is_initiator or self.fin:
            self.send(a_inst.initiator, Kind.DENY, a_inst, px, py, env.instance)
            return
        # px floods its Marker to all of ds_px, so its Marker targets here are fully known
        self.MkFrom.add(px)
        self.foreign[px] = a_inst
        self._add_dsinfo(px, ds_px)
        if marks:
            self.MkTo.add(py)
            self._add_dsinfo(px, {py})
        if not self._has_nbr(a_inst):
            self.Nbrs[a_inst.initiator] = a_inst
            self.MkTo.add(py)
            self._add_dsinfo(px, {py})
            self.send(a_inst.initiator, Kind.ACK, a_inst, px, py, self.init)
            self.accept_collided_nodes(a_inst)
        self.can_determine_sg()

    def on_ack(self, env: Envelope) -> None:
        if env.instance != self.init or not self.is_initiator:
            self.record(ev.DROPPED, Kind.ACK.value, env.sender, "stale")
            return
        _px, _py, b_inst = env.payload
        if not self.fin:
            self.Nbrs[b_inst.initiator] = b_inst
        self.accept_collided_nodes(b_inst)
        self.can_determine_sg()

    def on_deny(self, env: Envelope) -> None:
        if env.instance != self.init or not self.is_initiator:
            self.record(ev.DROPPED, Kind.DENY.value, env.sender, "stale")
            return
        px, py, b_inst = env.payload
        self.Wait.discard((px, py, b_inst))
        if not self._has_nbr(b_inst):
            self.can_determine_sg()

    def on_accept(self, env: Envelope) -> None:
        if env.instance != self.init:
            self.record(ev.DROPPED, Kind.ACCEPT.value, env.sender, "stale")
            return
        py, b_inst = env.payload
        if py not in self.pDS:
            self.send(py, Kind.MARKER, b_inst, b_inst.initiator)
        self.CollidedNodes.discard((py, b_inst))

    def accept_collided_nodes(self, b_inst: InstanceId) -> None:
        for px, py, pb in sorted(t for t in self.Wait if t[2] == b_inst):
            self.MkTo.add(px)
            self._add_dsinfo(py, {px})
            self.send(px, Kind.ACCEPT, self.init, py, pb)
            self.Wait.discard((px, py, pb))

    # -- phase 2 ----------------------------------------------------------

    def start_phase2(self) -> None:
        if not self.Nbrs:
            self.finish_phase2()
            return
        p2 = self.p2
        p2.rID, p2.dist, p2.pID = self.id, 0, self.id
        p2.Child, p2.LT, p2.CK = set(), set(), set()
        p2.heard, p2.reported = {}, False
        p2.InPhase2 = True
        self.record(ev.PHASE2_IN, self.init)
        for j in sorted(self.Nbrs):
            self.send(j, Kind.CHECK, self.init, p2.rID, p2.dist, p2.pID)
        buffered, self.p2_buffer = self.p2_buffer, []
        for env in buffered:
            self.on_phase2_message(env)

    def on_phase2_message(self, env: Envelope) -> None:
        if not self.is_initiator or not self._has_nbr(env.instance):
            self.record(ev.DROPPED, env.kind.value, env.sender, "not a neighbour")
            return
        if not self.p2.InPhase2:
            if not self.fin:
                self.p2_buffer.append(env)
            else:
                self.record(ev.DROPPED, env.kind.value, env.sender, "phase 2 over")
            return
        if env.kind is Kind.CHECK:
            self.on_check(env.sender, *env.payload)
        elif env.kind is Kind.LOCALTERM:
            self.on_localterm(env.sender)
        else:
            self.on_globalterm()

    def _settled(self) -> bool:
        """Every neighbour reported, agrees on the root and sits one hop away at most.

        Without the agreement test a node can report a neighbour that still
        believes in a larger root and later becomes its child, and the root
        then finishes before that subtree did.
        """
        p2 = self.p2
        if p2.CK != self.Nbrs.keys():
            return False
        for rid, dist in p2.heard.values():
            if rid != p2.rID or abs(dist - p2.dist) > 1:
                return False
        return True

    def _send_localterm(self) -> None:
        p2 = self.p2
        if p2.pID != self.id and not p2.reported:
            p2.reported = True
            self.send(p2.pID, Kind.LOCALTERM, self.init)

    def on_check(self, j: NodeId, rid_j: NodeId, dist_j: int, pid_j: NodeId) -> None:
        p2 = self.p2
        p2.CK.add(j)
        p2.heard[j] = (rid_j, dist_j)
        # a fresh Check means the sender's earlier LocalTerm no longer holds
        p2.LT.discard(j)
        p2.reported = False
        if rid_j < p2.rID or (rid_j == p2.rID and dist_j + 1 < p2.dist):
            p2.rID, p2.dist, p2.pID = rid_j, dist_j + 1, j
            for k in sorted(self.Nbrs):
                self.send(k, Kind.CHECK, self.init, p2.rID, p2.dist, p2.pID)
        if pid_j == self.id:
            p2.Child.add(j)
        elif j in p2.Child:
            p2.Child.discard(j)
        self._advance()

    def on_localterm(self, j: NodeId) -> None:
        self.p2.LT.add(j)
        self._advance()

    def _advance(self) -> None:
        p2 = self.p2
        if not self._settled() or p2.Child != p2.LT:
            return
        if p2.pID == self.id:
            if p2.Child == self.Nbrs.keys():
                for k in sorted(p2.Child):
                    self.send(k, Kind.GLOBALTERM, self.init)
                self.finish_phase2()
        else:
            self._send_localterm()

    def on_globalterm(self) -> None:
        for k in sorted(self.p2.Child):
            self.send(k, Kind.GLOBALTERM, self.init)
        self.finish_phase2()

    def finish_phase2(self) -> None:
        self.p2.InPhase2 = False
        self.record(ev.PHASE2_OUT, self.init, tuple(sorted(self.Nbrs)))
        for k in sorted(self.reported):
            mklist = frozenset(x for x, ds in self.DSInfo.items() if k in ds)
            self.send(k, Kind.FIN, self.init, mklist)
