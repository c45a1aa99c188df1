"""CSS baseline: groups merge under a main-initiator, one collision at a time.

Sub-initiators hold no group state; everything they receive that concerns
the merged group is relayed to their parent. Ids strictly decrease towards
the main-initiator, so the parent pointers can never form a cycle.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from . import events as ev
from .events import EventLog
from .messages import Envelope, InstanceId, Kind, NodeId
from .participant import Participant


@dataclass
class GroupState:
    """What a main-initiator owns, and what it hands over when it resigns."""

    tree: set = field(default_factory=set)  # InstanceIds merged under this main
    MkFrom: set = field(default_factory=set)
    MkTo: set = field(default_factory=set)
    DSInfo: dict = field(default_factory=dict)
    queue: deque = field(default_factory=deque)  # pending NewInit payloads, FIFO
    busy: Optional[tuple] = None  # token of the collision being resolved
    inflight: set = field(default_factory=set)  # inherited/indirect tokens still open
    expected: set = field(default_factory=set)  # initiators that must join before Fin

    def absorb(self, other: "GroupState") -> None:
        self.tree |= other.tree
        self.MkFrom |= other.MkFrom
        self.MkTo |= other.MkTo
        for k, ds in other.DSInfo.items():
            self.DSInfo.setdefault(k, set()).update(ds)
        self.queue.extend(other.queue)
        if other.busy is not None:
            self.inflight.add(other.busy)
        self.inflight |= other.inflight
        self.expected |= other.expected
        self.expected -= {i.initiator for i in self.tree}

    def to_payload(self) -> dict:
        return {
            "tree": frozenset(self.tree),
            "MkFrom": frozenset(self.MkFrom),
            "MkTo": frozenset(self.MkTo),
            "DSInfo": {k: frozenset(v) for k, v in self.DSInfo.items()},
            "queue": list(self.queue),
            "busy": self.busy,
            "inflight": frozenset(self.inflight),
            "expected": frozenset(self.expected),
        }

    @classmethod
    def from_payload(cls, raw: dict) -> "GroupState":
        return cls(
            tree=set(raw["tree"]),
            MkFrom=set(raw["MkFrom"]),
            MkTo=set(raw["MkTo"]),
            DSInfo={k: set(v) for k, v in raw["DSInfo"].items()},
            queue=deque(tuple(q) for q in raw["queue"]),
            busy=None if raw["busy"] is None else tuple(raw["busy"]),
            inflight={tuple(t) for t in raw["inflight"]},
            expected=set(raw["expected"]),
        )


_ROUTED = (Kind.CSS_DSINFO, Kind.NEWINIT, Kind.CSS_COMBINE, Kind.CSS_COMPINIT, Kind.CSS_INITINFO)


class CssNode(Participant):
    def __init__(self, node_id: NodeId, log: Optional[EventLog] = None, hold_collided_links: bool = True):
        super().__init__(node_id, log, hold_collided_links)
        self.role: Optional[InstanceId] = None  # own instance if this node initiated
        self.parent: Optional[NodeId] = None
        self.group: Optional[GroupState] = None
        self.decided = False
        self.tokens = 0

    @property
    def is_main(self) -> bool:
        return self.role is not None and self.parent is None

    def start_role(self, inst: InstanceId) -> None:
        self.role = inst
        self.parent = None
        self.decided = False
        self.group = GroupState(tree={inst})

    # -- participant hooks ------------------------------------------------

    def report_ds(self, inst: InstanceId, ds: frozenset) -> None:
        self.send(inst.initiator, Kind.CSS_DSINFO, inst, ds, self.id)

    def report_collision(self, sender: NodeId, inst: InstanceId) -> None:
        self.send(self.init.initiator, Kind.NEWINIT, self.init, self.id, sender, inst)

    # -- dispatch ---------------------------------------------------------

    def dispatch(self, env: Envelope) -> None:
        k = env.kind
        if k is Kind.APP:
            self.receive_app(env)
        elif k is Kind.MARKER:
            self.on_marker(env.sender, env.instance)
        elif k is Kind.OUT:
            if env.instance == self.init and self.init.initiator != self.id:
                self.cancel()
            else:
                self.record(ev.DROPPED, k.value, env.sender, "stale")
        elif k is Kind.FIN:
            mklist, covered = env.payload
            if self.init is not None and self.init in covered:
                self.accept_fin(mklist)
            else:
                self.record(ev.DROPPED, k.value, env.sender, "foreign instance")
        elif k is Kind.ACCEPT:
            token, req_main, py, b_inst = env.payload
            self.send(py, Kind.CSS_COMBINE, b_inst, token, req_main, b_inst)
            self.CollidedNodes.discard((py, b_inst))
        elif k is Kind.CSS_COMBINE and not env.forwarded and env.payload[2].initiator != self.id:
            # the opponent node hands the request to its own initiator
            self.send(env.payload[2].initiator, Kind.CSS_COMBINE, env.instance, *env.payload)
        elif k in _ROUTED:
            self.on_routed(env)
        else:
            self.record(ev.DROPPED, k.value, env.sender, "unknown kind")


    # -- initiator network -----------------------------------------------

    def on_routed(self, env: Envelope) -> None:
        k = env.kind
        if k is Kind.NEWINIT and not env.forwarded and self.role is not None:
            self.collisions_seen += 1
        if self.role is None:
            self._reject(env, "not an initiator")
        elif self.parent is not None:
            self.send(self.parent, k, env.instance, *env.payload, forwarded=True)
        elif k is Kind.CSS_DSINFO:
            self.on_dsinfo(env)
        elif k is Kind.NEWINIT:
            self.on_newinit(env)
        elif k is Kind.CSS_COMBINE:
            self.on_combine(*env.payload)
        elif k is Kind.CSS_INITINFO:
            self.on_initinfo(*env.payload)
        else:
            self.on_compinit(*env.payload)
        if self.is_main:
            self._pump()
            self._check_group()

    def _reject(self, env: Envelope, why: str) -> None:
        if env.kind is Kind.CSS_DSINFO:
            self.send(env.payload[1], Kind.OUT, env.instance)
        else:
            self.record(ev.DROPPED, env.kind.value, env.sender, why)

    def on_dsinfo(self, env: Envelope) -> None:
        g = self.group
        if self.decided or env.instance not in g.tree:
            self._reject(env, "decided")
            return
        ds, origin = env.payload
        g.MkFrom.add(origin)
        g.MkTo.update(ds)
        g.DSInfo.setdefault(origin, set()).update(ds)

    def on_newinit(self, env: Envelope) -> None:
        if self.decided:
            self.record(ev.DROPPED, Kind.NEWINIT.value, env.sender, "decided")
            return
        px, py, b_inst = env.payload
        self.group.queue.append((px, py, b_inst, env.instance))

    def _new_token(self) -> tuple:
        self.tokens += 1
        return (self.id, self.tokens)

    def _pump(self) -> None:
        g = self.group
        if self.decided or g.busy is not None or not g.queue:
            return
        px, py, b_inst, a_inst = g.queue.popleft()
        g.busy = self._new_token()
        self.send(px, Kind.ACCEPT, a_inst, g.busy, self.id, py, b_inst)

    def _resolve(self, token) -> None:
        g = self.group
        if token is None:
            return
        if token == g.busy:
            g.busy = None
        else:
            g.inflight.discard(token)

    def _resign(self, new_parent: NodeId, token) -> None:
        pending = list(self.group.queue)
        self.group.queue.clear()
        state = self.group.to_payload()
        self.parent = new_parent
        self.group = GroupState()
        self.record(ev.SUBORDINATED, self.role, new_parent)
        self.send(new_parent, Kind.CSS_INITINFO, self.role, token, state)
        # queued collision notices travel on like any other NewInit at a sub
        for px, py, b_inst, a_inst in pending:
            self.send(new_parent, Kind.NEWINIT, a_inst, px, py, b_inst, forwarded=True)

    def on_combine(self, token, req_main: NodeId, b_inst: InstanceId) -> None:
        if self.decided or req_main == self.id:
            self.send(req_main, Kind.CSS_INITINFO, self.role, token, None)
        elif req_main < self.id:
            self._resign(req_main, token)
        else:
            self.group.expected.add(req_main)
            self.send(req_main, Kind.CSS_COMPINIT, self.role, token, self.role)

    def on_initinfo(self, token, state) -> None:
        if self.decided:
            self.record(ev.DROPPED, Kind.CSS_INITINFO.value, self.id, "decided")
            return
        if state is not None:
            self.group.absorb(GroupState.from_payload(state))
        self._resolve(token)

    def on_compinit(self, token, b_inst: InstanceId) -> None:
        g = self.group
        self._resolve(token)
        b = b_inst.initiator
        if any(i.initiator == b for i in g.tree):
            return
        if b < self.id:
            self._resign(b, None)
        else:
            again = self._new_token()
            g.inflight.add(again)
            self.send(b, Kind.CSS_COMBINE, b_inst, again, self.id, b_inst)

    def _check_group(self) -> None:
        g = self.group
        if self.decided or not g.MkFrom:
            return
        g.expected -= {i.initiator for i in g.tree}
        if g.busy is not None or g.queue or g.inflight or g.expected:
            return
        if not g.MkTo <= g.MkFrom:
            return
        self.decided = True
        self.record(ev.DETERMINED, self.role)
        covered = frozenset(g.tree)
        for k in sorted(g.MkFrom):
            mklist = frozenset(x for x, ds in g.DSInfo.items() if k in ds)
            self.send(k, Kind.FIN, self.role, mklist, covered)
