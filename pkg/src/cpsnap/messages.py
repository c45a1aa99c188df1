"""Shared protocol vocabulary: ids, message kinds, envelopes, checkpoints.

Both snapshot algorithms (CPS and the CSS baseline) speak in terms of the
types defined here, and the simulator, checker and metrics code only ever
look at these values.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Any, Optional

NodeId = int


@dataclass(frozen=True, order=True, slots=True)
class InstanceId:
    """One snapshot (or rollback) instance: initiator plus per-initiator sequence."""

    initiator: NodeId
    sequence: int = 0

    def to_json(self) -> list[int]:
        return [self.initiator, self.sequence]

    @classmethod
    def from_json(cls, raw) -> "InstanceId":
        return cls(int(raw[0]), int(raw[1]))


class Kind(enum.Enum):
    APP = "App"
    # CPS phase 1
    MARKER = "Marker"
    MYDS = "MyDS"
    OUT = "Out"
    FIN = "Fin"
    NEWINIT = "NewInit"
    LINK = "Link"
    ACK = "Ack"
    DENY = "Deny"
    ACCEPT = "Accept"
    MK_SOURCES = "MkSources"
    # CPS phase 2
    CHECK = "Check"
    LOCALTERM = "LocalTerm"
    GLOBALTERM = "GlobalTerm"
    # rollback
    RB_MARKER = "RbMarker"
    RB_MYDS = "RbMyDS"
    RB_OUT = "RbOut"
    RB_FIN = "RbFin"
    # CSS-only
    CSS_DSINFO = "CssDSinfo"
    CSS_COMBINE = "CssCombine"
    CSS_COMPINIT = "CssCompInit"
    CSS_INITINFO = "CssInitInfo"


class MessageCategory(enum.Enum):
    MARKER = "Marker"
    NORMAL = "Normal"
    COLLISION = "Collision"
    INITIATOR_NETWORK = "InitiatorNetwork"
    APPLICATION = "Application"


_BASE_CATEGORY = {
    Kind.APP: MessageCategory.APPLICATION,
    Kind.MARKER: MessageCategory.MARKER,
    Kind.MYDS: MessageCategory.NORMAL,
    Kind.OUT: MessageCategory.NORMAL,
    Kind.FIN: MessageCategory.NORMAL,
    Kind.NEWINIT: MessageCategory.COLLISION,
    Kind.LINK: MessageCategory.COLLISION,
    Kind.ACK: MessageCategory.COLLISION,
    Kind.DENY: MessageCategory.COLLISION,
    Kind.ACCEPT: MessageCategory.COLLISION,
    Kind.MK_SOURCES: MessageCategory.COLLISION,
    Kind.CHECK: MessageCategory.INITIATOR_NETWORK,
    Kind.LOCALTERM: MessageCategory.INITIATOR_NETWORK,
    Kind.GLOBALTERM: MessageCategory.INITIATOR_NETWORK,
    Kind.RB_MARKER: MessageCategory.MARKER,
    Kind.RB_MYDS: MessageCategory.NORMAL,
    Kind.RB_OUT: MessageCategory.NORMAL,
    Kind.RB_FIN: MessageCategory.NORMAL,
    Kind.CSS_DSINFO: MessageCategory.NORMAL,
    Kind.CSS_COMBINE: MessageCategory.COLLISION,
    Kind.CSS_COMPINIT: MessageCategory.COLLISION,
    Kind.CSS_INITINFO: MessageCategory.COLLISION,
}

# kinds that CSS sub-initiators relay toward their main-initiator
FORWARDABLE = frozenset(
    {Kind.CSS_DSINFO, Kind.NEWINIT, Kind.CSS_COMBINE, Kind.CSS_COMPINIT, Kind.CSS_INITINFO}
)


def classify(kind: Kind, forwarded: bool = False) -> MessageCategory:
    """Map a message kind to its accounting category.

    A CSS message relayed by a sub-initiator is charged to the initiator
    network; the same kind sent directly keeps its base category.
    """
    if forwarded and kind in FORWARDABLE:
        return MessageCategory.INITIATOR_NETWORK
    return _BASE_CATEGORY[kind]


@dataclass(frozen=True, slots=True)
class Envelope:
    sender: NodeId
    dest: NodeId
    kind: Kind
    instance: Optional[InstanceId] = None
    payload: tuple = ()
    sent_round: int = 0
    forwarded: bool = False

    def __post_init__(self):
        if (self.kind is Kind.APP) != (self.instance is None):
            raise ValueError(f"{self.kind.value} envelope has wrong instance tag: {self.instance}")

    @property
    def category(self) -> MessageCategory:
        return classify(self.kind, self.forwarded)

    def to_json(self) -> str:
        return json.dumps(
            {
                "from": self.sender,
                "to": self.dest,
                "instance": None if self.instance is None else self.instance.to_json(),
                "kind": self.kind.value,
                "payload": _encode(self.payload),
                "sent_round": self.sent_round,
                "forwarded": self.forwarded,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, line: str) -> "Envelope":
        raw = json.loads(line)
        inst = raw.get("instance")
        return cls(
            sender=raw["from"],
            dest=raw["to"],
            kind=Kind(raw["kind"]),
            instance=None if inst is None else InstanceId.from_json(inst),
            payload=_decode(raw.get("payload", [])),
            sent_round=raw.get("sent_round", 0),
            forwarded=raw.get("forwarded", False),
        )


def _encode(value: Any) -> Any:
    if isinstance(value, InstanceId):
        return {"instance": value.to_json()}
    if isinstance(value, (set, frozenset)):
        return {"set": sorted((_encode(v) for v in value), key=_order)}
    if isinstance(value, tuple):
        return [_encode(v) for v in value]
    if isinstance(value, list):
        return {"list": [_encode(v) for v in value]}
    if isinstance(value, dict):
        return {"map": [[_encode(k), _encode(v)] for k, v in sorted(value.items())]}
    return value


def _order(v: Any) -> tuple:
    # numbers first in numeric order, anything else by its JSON text
    if isinstance(v, (int, float)):
        return (0, v, "")
    return (1, 0, json.dumps(v, sort_keys=True))


def _decode(value: Any) -> Any:
    if isinstance(value, dict):
        if "instance" in value:
            return InstanceId.from_json(value["instance"])
        if "set" in value:
            return frozenset(_decode(v) for v in value["set"])
        if "list" in value:
            return [_decode(v) for v in value["list"]]
        if "map" in value:
            return {_decode(k): _decode(v) for k, v in value["map"]}
    if isinstance(value, list):
        return tuple(_decode(v) for v in value)
    return value


@dataclass(frozen=True, slots=True)
class AppState:
    """Toy application state: counters plus a digest over received message ids."""

    sent: int = 0
    received: int = 0
    digest: int = 0

    def after_send(self) -> "AppState":
        return AppState(self.sent + 1, self.received, self.digest)

    def after_receive(self, msg_id: int) -> "AppState":
        return AppState(self.sent, self.received + 1, fold_digest(self.digest, msg_id))


_DIGEST_MOD = (1 << 61) - 1


def fold_digest(digest: int, msg_id: int) -> int:
    return (digest * 1_000_003 + msg_id + 1) % _DIGEST_MOD


@dataclass(slots=True)
class CheckpointRecord:
    owner: NodeId
    instance: InstanceId
    local_state: AppState
    in_transit: list[tuple[NodeId, int]] = field(default_factory=list)
