"""Per-node snapshot bookkeeping shared by CPS and CSS.

Both algorithms treat a non-initiator node the same way: take a checkpoint on
the first Marker, report DS to the initiator, flood Markers, queue received
app messages, and terminate once every expected Marker arrived. Subclasses
supply how DS reports and collision notices are routed.
"""

from __future__ import annotations

from collections import deque
from typing import Iterable, Optional

from . import events as ev
from .events import EventLog
from .messages import CheckpointRecord, Envelope, InstanceId, Kind, NodeId
from .node import BaseNode, InitiateRejected

_HELD_KINDS = (Kind.APP, Kind.MARKER)


class Participant(BaseNode):
    """``hold_collided_links``: while a collided Marker from y is unresolved,
    App and Marker envelopes from y are parked and replayed in order once the
    collision is settled. Without it, a Marker replayed at termination can
    checkpoint after messages that followed it on the same link.
    """

    def __init__(self, node_id: NodeId, log: Optional[EventLog] = None, hold_collided_links: bool = True):
        super().__init__(node_id, log)
        self.hold_collided_links = hold_collided_links
        self.seq = 0
        self.init: Optional[InstanceId] = None
        self.pDS: set[NodeId] = set()
        self.marked: set[NodeId] = set()  # nodes already sent a Marker of the current instance
        self.RcvMk: set[NodeId] = set()
        self.MkList: Optional[set[NodeId]] = None
        self.fin = False
        self.MsgQ: list[tuple[NodeId, int]] = []
        self.CollidedNodes: set[tuple[NodeId, InstanceId]] = set()
        self.tentative = None
        self.done_instances: set[InstanceId] = set()
        self.held: dict[NodeId, deque] = {}

    # -- subclass hooks ---------------------------------------------------

    def report_ds(self, inst: InstanceId, ds: frozenset) -> None:
        raise NotImplementedError

    def report_collision(self, sender: NodeId, inst: InstanceId) -> None:
        raise NotImplementedError

    def termination_blocked(self) -> bool:
        return False

    def reset_role(self) -> None:
        pass

    # -- application hooks ------------------------------------------------

    def marker_suppressed(self) -> bool:
        return False

    def before_send_app(self, dest: NodeId) -> None:
        # DS also grows on receipt, so it cannot stand in for "already marked"
        if self.init is not None and dest not in self.marked and not self.marker_suppressed():
            self.marked.add(dest)
            self.send(dest, Kind.MARKER, self.init, self.init.initiator)
        self.DS.add(dest)

    def before_receive_app(self, sender: NodeId, msg_id: int) -> None:
        self.DS.add(sender)
        if self.init is not None and sender not in self.RcvMk:
            self.MsgQ.append((sender, msg_id))

    @property
    def idle(self) -> bool:
        return self.init is None and not self.held

    # -- initiation -------------------------------------------------------

    def initiate(self) -> InstanceId:
        if self.init is not None:
            raise InitiateRejected(f"node {self.id} already runs {self.init}")
        inst = InstanceId(self.id, self.seq)
        self.seq += 1
        self.start_role(inst)
        self._local.append(Envelope(self.id, self.id, Kind.MARKER, inst, (self.id,), self.round))
        self._flush_local()
        return inst

    def start_role(self, inst: InstanceId) -> None:
        pass

    # -- link holding -----------------------------------------------------

    def deliver(self, env: Envelope) -> None:
        if env.kind in _HELD_KINDS and env.sender in self.held:
            self.held[env.sender].append(env)
            return
        super().deliver(env)
        self._release_held()

    def _hold_blocks(self, sender: NodeId) -> bool:
        return any(y == sender for (y, _b) in self.CollidedNodes)

    def _release_held(self) -> None:
        progressed = True
        while progressed and self.held:
            progressed = False
            for sender in sorted(self.held):
                if self._hold_blocks(sender):
                    continue
                queue = self.held.pop(sender)
                while queue:
                    BaseNode.deliver(self, queue.popleft())
                    if self._hold_blocks(sender):
                        if queue:
                            self.held.setdefault(sender, deque()).extendleft(reversed(queue))
                        break
                progressed = True
                break

    # -- markers ----------------------------------------------------------

    def on_marker(self, sender: NodeId, inst: InstanceId) -> None:
        if inst in self.done_instances:
            self.record(ev.DROPPED, Kind.MARKER.value, sender, "finished instance")
            return
        if self.init is None:
            self.init = inst
            self.RcvMk.add(sender)
            self.pDS, self.DS = self.DS, set()
            self.marked = set(self.pDS)
            self.MkList = None
            self.fin = False
            self.MsgQ = []
            self.tentative = self.app
            self.record(ev.CHECKPOINT, inst)
            self.report_ds(inst, frozenset(self.pDS))
            for k in sorted(self.pDS):
                self.send(k, Kind.MARKER, inst, inst.initiator)
        elif self.init == inst:
            self.RcvMk.add(sender)
            if self.fin:
                self.check_termination()
        else:
            self.RcvMk.add(sender)
            self.CollidedNodes.add((sender, inst))
            if self.hold_collided_links and sender != self.id:
                self.held.setdefault(sender, deque())
            if not self.fin:
                self.report_collision(sender, inst)

    def accept_fin(self, mklist: Iterable[NodeId]) -> None:
        self.MkList = set(mklist)
        self.fin = True
        self.check_termination()

    def check_termination(self) -> None:
        if not self.fin or self.MkList is None:
            return
        if not self.MkList <= self.RcvMk:
            return
        if self.termination_blocked():
            return
        self.terminate()

    def terminate(self, covered: Iterable[InstanceId] = ()) -> None:
        inst = self.init
        in_transit = [(s, m) for (s, m) in self.MsgQ if s in self.MkList]
        self.checkpoint = CheckpointRecord(self.id, inst, self.tentative, in_transit)
        self.record(ev.TERMINATED, inst, tuple(m for _s, m in in_transit))
        self.done_instances.add(inst)
        self.done_instances.update(covered)
        self.init = None
        self.clear_instance()
        self.reprocess_markers()

    def cancel(self) -> None:
        """Leave the current instance without a checkpoint (Out)."""
        self.record(ev.CANCEL, self.init)
        self.done_instances.add(self.init)
        self.init = None
        self.DS |= self.pDS
        self.clear_instance()
        self.reprocess_markers()

    def clear_instance(self) -> None:
        self.pDS = set()
        self.marked = set()
        self.RcvMk = set()
        self.MkList = None
        self.fin = False
        self.MsgQ = []
        self.tentative = None
        self.reset_role()

    def reprocess_markers(self) -> None:
        pending = sorted(self.CollidedNodes)
        self.CollidedNodes.clear()
        for sender, inst in pending:
            self.on_marker(sender, inst)
