"""Rollback group determination and local restore (mixed into CpsNode)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from . import events as ev
from .messages import AppState, Envelope, InstanceId, Kind, NodeId
from .node import InitiateRejected


@dataclass
class RollbackState:
    RbInit: Optional[InstanceId] = None
    RbRcvMk: set = field(default_factory=set)
    RbMkList: Optional[set] = None
    RbFin: bool = False
    RbMkFrom: set = field(default_factory=set)
    RbMkTo: set = field(default_factory=set)
    RbDSInfo: dict = field(default_factory=dict)
    MsgQ: list = field(default_factory=list)  # App envelopes held while stopped


class RollbackMixin:
    """Needs BaseNode plumbing: send, record, DS, app, checkpoint, _local."""

    def init_rollback(self) -> None:
        self.rb = RollbackState()
        self.rb_seq = 0
        self.rb_done: set[InstanceId] = set()
        # envelopes to put back at the head of inbound links; the scheduler drains this
        self.reinject: list[Envelope] = []

    @property
    def rb_init(self) -> Optional[InstanceId]:
        return self.rb.RbInit

    def rb_initiate(self) -> InstanceId:
        if self.rb.RbInit is not None:
            raise InitiateRejected(f"node {self.id} is already rolling back ({self.rb.RbInit})")
        inst = InstanceId(self.id, self.rb_seq)
        self.rb_seq += 1
        self._local.append(Envelope(self.id, self.id, Kind.RB_MARKER, inst, (self.id,), self.round))
        self._flush_local()
        return inst

    def dispatch_rollback(self, env: Envelope) -> None:
        k = env.kind
        if k is Kind.RB_MARKER:
            self.on_rbmarker(env.sender, env.instance)
        elif k is Kind.RB_MYDS:
            self.on_rbmyds(env)
        elif k is Kind.RB_OUT:
            self.on_rbout(env)
        elif k is Kind.RB_FIN:
            self.on_rbfin(env)
        else:
            self.record(ev.DROPPED, k.value, env.sender, "unknown kind")

    def rb_queue_app(self, env: Envelope) -> None:
        self.rb.MsgQ.append(env)

    def on_rbmarker(self, sender: NodeId, inst: InstanceId) -> None:
        rb = self.rb
        if inst in self.rb_done:
            self.record(ev.DROPPED, Kind.RB_MARKER.value, sender, "finished rollback")
        elif rb.RbInit is None:
            self.app_stopped = True
            rb.RbInit = inst
            rb.RbRcvMk = {sender}
            rb.RbMkList = None
            rb.RbFin = False
            self.record(ev.RB_STOP, inst)
            self.send(inst.initiator, Kind.RB_MYDS, inst, frozenset(self.DS))
            for k in sorted(self.DS):
                self.send(k, Kind.RB_MARKER, inst, inst.initiator)
        elif rb.RbInit == inst:
            rb.RbRcvMk.add(sender)
            if rb.RbFin:
                self.check_rb_termination()
        else:
            self.record(ev.DROPPED, Kind.RB_MARKER.value, sender, "concurrent rollback")

    def on_rbmyds(self, env: Envelope) -> None:
        rb = self.rb
        if rb.RbInit != env.instance or rb.RbInit.initiator != self.id or rb.RbFin:
            self.send(env.sender, Kind.RB_OUT, env.instance)
            return
        ds = env.payload[0]
        rb.RbMkFrom.add(env.sender)
        rb.RbMkTo.update(ds)
        rb.RbDSInfo.setdefault(env.sender, set()).update(ds)
        if rb.RbMkTo <= rb.RbMkFrom:
            rb.RbFin = True
            for k in sorted(rb.RbMkFrom):
                lst = frozenset(x for x, ds_x in rb.RbDSInfo.items() if k in ds_x)
                self.send(k, Kind.RB_FIN, rb.RbInit, lst)

    def on_rbout(self, env: Envelope) -> None:
        if env.instance != self.rb.RbInit:
            return
        self.rb_done.add(env.instance)
        held = self.rb.MsgQ
        self.rb = RollbackState()
        self.app_stopped = False
        self.record(ev.CANCEL, env.instance)
        for m in held:
            self.receive_app(m)

    def on_rbfin(self, env: Envelope) -> None:
        if env.instance != self.rb.RbInit:
            self.record(ev.DROPPED, Kind.RB_FIN.value, env.sender, "foreign rollback")
            return
        self.rb.RbMkList = set(env.payload[0])
        self.rb.RbFin = True
        self.check_rb_termination()

    def check_rb_termination(self) -> None:
        rb = self.rb
        if rb.RbMkList is None or not rb.RbMkList <= rb.RbRcvMk:
            return
        cp = self.checkpoint
        self.app = cp.local_state if cp is not None else AppState()
        restored = []
        if cp is not None:
            for sender, msg_id in cp.in_transit:
                restored.append(Envelope(sender, self.id, Kind.APP, None, (msg_id,), self.round))
        for env in rb.MsgQ:
            if env.sender in rb.RbMkList:
                self.record(ev.DISCARD, env.payload[0], env.sender)
            else:
                restored.append(env)
        self.reinject.extend(restored)
        self.DS = set()
        inst = rb.RbInit
        self.rb_done.add(inst)
        self.record(
            ev.RESTORED,
            inst,
            (self.app.sent, self.app.received, self.app.digest),
            tuple(e.payload[0] for e in restored),
            tuple(sorted(rb.RbMkList)),
        )
        self.rb = RollbackState()
        self.app_stopped = False
