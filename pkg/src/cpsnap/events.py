"""Global event trace: the only input the consistency oracle reads."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .messages import InstanceId

SEND = "Send"
RECEIVE = "Receive"
DISCARD = "Discarded"
CHECKPOINT = "CheckpointTaken"
CANCEL = "CheckpointCancelled"
TERMINATED = "InstanceTerminated"
DETERMINED = "GroupDetermined"
PHASE2_IN = "Phase2Entered"
PHASE2_OUT = "Phase2Exited"
RB_STOP = "RollbackStopped"
RESTORED = "RollbackRestored"
DROPPED = "Dropped"
SUBORDINATED = "BecameSubInitiator"

EVENT_TYPES = (
    SEND, RECEIVE, DISCARD, CHECKPOINT, CANCEL, TERMINATED, DETERMINED,
    PHASE2_IN, PHASE2_OUT, RB_STOP, RESTORED, DROPPED, SUBORDINATED,
)


@dataclass(frozen=True, slots=True)
class Event:
    """One entry of the trace.

    ``data`` depends on ``etype``:
      Send/Receive/Discarded: (msg_id, peer)
      CheckpointTaken/CheckpointCancelled/GroupDetermined/Phase2Entered: (instance,)
      InstanceTerminated: (instance, in_transit msg ids)
      Phase2Exited: (instance, neighbour ids)
      RollbackRestored: (instance, (sent, received, digest), reinjected msg ids, members-known list)
      Dropped: (kind, sender, reason)
      BecameSubInitiator: (instance, new parent id)
    """

    seq: int
    round: int
    node: int
    etype: str
    data: tuple = ()

    def to_dict(self) -> dict:
        return {
            "seq": self.seq,
            "round": self.round,
            "node": self.node,
            "type": self.etype,
            "data": _enc(self.data),
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "Event":
        return cls(raw["seq"], raw["round"], raw["node"], raw["type"], _dec(raw.get("data", [])))


def _enc(v):
    if isinstance(v, InstanceId):
        return {"instance": v.to_json()}
    if isinstance(v, (tuple, list)):
        return [_enc(x) for x in v]
    return v


def _dec(v):
    if isinstance(v, dict) and "instance" in v:
        return InstanceId.from_json(v["instance"])
    if isinstance(v, list):
        return tuple(_dec(x) for x in v)
    return v


@dataclass
class EventLog:
    events: list[Event] = field(default_factory=list)

    def record(self, round_: int, node: int, etype: str, *data) -> Event:
        ev = Event(len(self.events), round_, node, etype, tuple(data))
        self.events.append(ev)
        return ev

    def __iter__(self) -> Iterator[Event]:
        return iter(self.events)

    def __len__(self) -> int:
        return len(self.events)

    def of_type(self, *etypes: str) -> list[Event]:
        wanted = set(etypes)
        return [e for e in self.events if e.etype in wanted]

    def to_jsonl(self) -> Iterable[str]:
        for ev in self.events:
            yield json.dumps({"record": "event", **ev.to_dict()}, sort_keys=True)

    @classmethod
    def from_records(cls, records: Iterable[dict]) -> "EventLog":
        log = cls()
        for raw in records:
            if raw.get("record", "event") == "event":
                log.events.append(Event.from_dict(raw))
        log.events.sort(key=lambda e: e.seq)
        return log
