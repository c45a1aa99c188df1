"""Behaviour shared by every protocol node: outbox, self-delivery, app hooks."""

from __future__ import annotations

from collections import deque
from typing import Optional

from . import events as ev
from .events import EventLog
from .messages import AppState, CheckpointRecord, Envelope, InstanceId, Kind, NodeId


class ProtocolError(RuntimeError):
    pass


class InitiateRejected(ProtocolError):
    """Raised when a node is asked to start an instance while it is in one."""


class BaseNode:
    def __init__(self, node_id: NodeId, log: Optional[EventLog] = None):
        self.id = node_id
        self.log = log if log is not None else EventLog()
        self.round = 0
        self.outbox: list[Envelope] = []
        self._local: deque[Envelope] = deque()
        self._dispatching = False

        self.app = AppState()
        self.app_stopped = False
        self.DS: set[NodeId] = set()
        self.checkpoint: Optional[CheckpointRecord] = None
        self.collisions_seen = 0
        self.processed = 0

    # -- plumbing ---------------------------------------------------------

    def send(self, dest: NodeId, kind: Kind, instance: Optional[InstanceId], *payload, forwarded=False):
        env = Envelope(self.id, dest, kind, instance, payload, self.round, forwarded)
        if dest == self.id:
            self._local.append(env)
        else:
            self.outbox.append(env)

    def record(self, etype: str, *data):
        self.log.record(self.round, self.id, etype, *data)

    def drain(self) -> list[Envelope]:
        out, self.outbox = self.outbox, []
        return out

    def deliver(self, env: Envelope) -> None:
        """Entry point used by the scheduler for one inbound envelope."""
        if env.kind is not Kind.APP:
            self.processed += 1
        self._run(env)

    def _run(self, env: Optional[Envelope]) -> None:
        if env is not None:
            self._local.append(env)
        if self._dispatching:
            return
        self._dispatching = True
        try:
            while self._local:
                self.dispatch(self._local.popleft())
        finally:
            self._dispatching = False

    def _flush_local(self) -> None:
        self._run(None)

    def dispatch(self, env: Envelope) -> None:  # pragma: no cover - abstract
        raise NotImplementedError

    # -- application ------------------------------------------------------

    def app_send(self, dest: NodeId, msg_id: int) -> None:
        if dest == self.id:
            raise ProtocolError("application messages to self are not modelled")
        self.before_send_app(dest)
        self.send(dest, Kind.APP, None, msg_id)
        self.app = self.app.after_send()
        self.record(ev.SEND, msg_id, dest)
        self._flush_local()

    def before_send_app(self, dest: NodeId) -> None:
        self.DS.add(dest)

    def receive_app(self, env: Envelope) -> None:
        msg_id = env.payload[0]
        self.before_receive_app(env.sender, msg_id)
        self.app = self.app.after_receive(msg_id)
        self.record(ev.RECEIVE, msg_id, env.sender)

    def before_receive_app(self, sender: NodeId, msg_id: int) -> None:
        self.DS.add(sender)

    @property
    def idle(self) -> bool:
        return True
