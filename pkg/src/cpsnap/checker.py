"""Log-only consistency oracle.

Everything here is derived from the event trace: happened-before comes from
vector clocks over application sends and receives, checkpoints come from
CheckpointTaken/InstanceTerminated events. No node object is ever consulted,
so a protocol bug cannot hide itself from the checks.
"""

from __future__ import annotations

import json
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from . import events as ev
from . import vclock
from .events import Event, EventLog
from .messages import fold_digest


class MalformedLog(ValueError):
    pass


@dataclass
class CheckResult:
    name: str
    passed: bool
    checked: int = 0
    counterexample: list = field(default_factory=list)  # event seq numbers
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "check": self.name,
            "passed": self.passed,
            "checked": self.checked,
            "counterexample": list(self.counterexample),
            "detail": self.detail,
        }


@dataclass
class VerdictReport:
    results: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def __getitem__(self, name: str) -> CheckResult:
        for r in self.results:
            if r.name == name:
                return r
        raise KeyError(name)

    def merge(self, other: "VerdictReport") -> "VerdictReport":
        return VerdictReport(self.results + other.results)

    def to_json(self) -> str:
        return json.dumps({"passed": self.passed, "checks": [r.to_dict() for r in self.results]}, sort_keys=True)


def _fail(name, checked, cex, detail) -> VerdictReport:
    return VerdictReport([CheckResult(name, False, checked, list(cex), detail)])


def _ok(name, checked, detail="") -> VerdictReport:
    return VerdictReport([CheckResult(name, True, checked, [], detail)])


# -- causal order ---------------------------------------------------------

_CAUSAL_TYPES = frozenset({ev.SEND, ev.RECEIVE, ev.CHECKPOINT, ev.TERMINATED, ev.RB_STOP, ev.RESTORED})


@dataclass
class Clocks:
    events: list  # the labelled events, in log order
    row: dict  # event seq -> row index
    matrix: np.ndarray  # rows x nodes

    def of(self, e: Event) -> np.ndarray:
        return self.matrix[self.row[e.seq]]

    def precedes(self, a: Event, b: Event) -> bool:
        """a happened before b (a != b)."""
        if a.seq == b.seq:
            return False
        if a.node == b.node:
            return a.seq < b.seq
        return bool(self.of(b)[a.node] >= self.of(a)[a.node])


def assign_clocks(log: EventLog, n: Optional[int] = None) -> Clocks:
    evs = [e for e in log.events if e.etype in _CAUSAL_TYPES]
    if n is None:
        n = 1 + max((e.node for e in log.events), default=-1)
        for e in evs:
            if e.etype in (ev.SEND, ev.RECEIVE):
                n = max(n, e.data[1] + 1)
    node = np.fromiter((e.node for e in evs), dtype=np.int64, count=len(evs))
    kind = np.zeros(len(evs), dtype=np.int64)
    ref = np.full(len(evs), -1, dtype=np.int64)
    sent_at: dict[int, tuple[int, int, int]] = {}
    for idx, e in enumerate(evs):
        if e.etype == ev.SEND:
            kind[idx] = 1
            sent_at[e.data[0]] = (idx, e.node, e.data[1])
        elif e.etype == ev.RECEIVE:
            kind[idx] = 2
            hit = sent_at.get(e.data[0])
            if hit is None or hit[1] != e.data[1] or hit[2] != e.node:
                raise MalformedLog(f"event {e.seq}: receive of message {e.data[0]} without a matching send")
            ref[idx] = hit[0]
    matrix = vclock.assign(node, kind, ref, max(n, 1))
    return Clocks(evs, {e.seq: i for i, e in enumerate(evs)}, matrix)


def prefix_before(log: EventLog, etype: str) -> EventLog:
    """Events strictly before the first event of ``etype`` (whole log if none)."""
    for i, e in enumerate(log.events):
        if e.etype == etype:
            return EventLog(log.events[:i])
    return log


# -- checkpoints ----------------------------------------------------------


@dataclass
class CommittedCheckpoint:
    node: int
    taken: Event  # CheckpointTaken
    terminated: Event  # InstanceTerminated
    in_transit: tuple


def latest_checkpoints(log: EventLog) -> dict[int, CommittedCheckpoint]:
    """Per node, the checkpoint of its most recently terminated instance."""
    taken: dict[tuple, Event] = {}
    out: dict[int, CommittedCheckpoint] = {}
    for e in log.events:
        if e.etype == ev.CHECKPOINT:
            taken[(e.node, e.data[0])] = e
        elif e.etype == ev.TERMINATED:
            t = taken.get((e.node, e.data[0]))
            if t is None:
                raise MalformedLog(f"event {e.seq}: termination without a checkpoint")
            out[e.node] = CommittedCheckpoint(e.node, t, e, tuple(e.data[1]))
    return out


def _app_messages(log: EventLog):
    """msg id -> (send event, first receive event or None)."""
    sends: dict[int, Event] = {}
    recvs: dict[int, Event] = {}
    for e in log.events:
        if e.etype == ev.SEND:
            sends[e.data[0]] = e
        elif e.etype == ev.RECEIVE and e.data[0] not in recvs:
            recvs[e.data[0]] = e
    return [(sends[m], recvs.get(m)) for m in sorted(sends)]


def _message_chain(clocks: Clocks, start: Event, goal: Event) -> list[int]:
    """Event seqs of a send/receive path from after ``start`` to before ``goal``."""
    evs = clocks.events
    pos = clocks.row
    by_node: dict[int, list[int]] = defaultdict(list)
    for i, e in enumerate(evs):
        by_node[e.node].append(i)
    recv_of: dict[int, list[int]] = defaultdict(list)
    for i, e in enumerate(evs):
        if e.etype == ev.RECEIVE:
            recv_of[e.data[0]].append(i)
    nxt = {}
    for idxs in by_node.values():
        for a, b in zip(idxs, idxs[1:]):
            nxt[a] = b
    src = pos[start.seq]
    target_node, target_row = goal.node, pos[goal.seq]
    parent = {src: None}
    q = deque([src])
    while q:
        u = q.popleft()
        e = evs[u]
        if e.node == target_node and u < target_row and u != src:
            path = []
            while u is not None:
                if evs[u].etype in (ev.SEND, ev.RECEIVE):
                    path.append(evs[u].seq)
                u = parent[u]
            return path[::-1]
        succ = [nxt[u]] if u in nxt else []
        if e.etype == ev.SEND:
            succ += recv_of.get(e.data[0], [])
        for v in succ:
            if v not in parent:
                parent[v] = u
                q.append(v)
    return []


def check_checkpoint_concurrency(log: EventLog, clocks: Optional[Clocks] = None) -> VerdictReport:
    name = "checkpoint_concurrency"
    cps = latest_checkpoints(log)
    if len(cps) < 2:
        return _ok(name, len(cps), "fewer than two checkpoints")
    clocks = clocks or assign_clocks(log)
    order = sorted(cps)
    rows = np.stack([clocks.of(cps[i].taken) for i in order])
    hit = vclock.first_precedence(rows, np.array(order, dtype=np.int64))
    if hit is None:
        return _ok(name, len(order))
    a, b = cps[order[hit[0]]].taken, cps[order[hit[1]]].taken
    chain = _message_chain(clocks, a, b)
    return _fail(name, len(order), [a.seq] + chain + [b.seq], f"checkpoint of node {a.node} precedes that of node {b.node}")


def check_in_transit(log: EventLog) -> VerdictReport:
    name = "in_transit"
    cps = latest_checkpoints(log)
    checked = 0
    for send, recv in _app_messages(log):
        i, j, m = send.node, send.data[1], send.data[0]
        if i not in cps or j not in cps:
            continue
        recorded = m in cps[j].in_transit
        if recv is None:
            if recorded:
                return _fail(name, checked, [send.seq], f"message {m} recorded but never received")
            continue
        checked += 1
        expected = send.seq < cps[i].taken.seq and recv.seq > cps[j].taken.seq
        if expected != recorded:
            why = "missing from" if expected else "wrongly recorded in"
            return _fail(
                name, checked, [send.seq, recv.seq, cps[i].taken.seq, cps[j].taken.seq],
                f"message {m} ({i}->{j}) {why} the checkpoint of node {j}",
            )
    dest_of = {s.data[0]: s.data[1] for s, _r in _app_messages(log)}
    for j, cp in sorted(cps.items()):
        for m in cp.in_transit:
            if dest_of.get(m) != j:
                return _fail(name, checked, [cp.terminated.seq], f"node {j} recorded message {m} that was never sent to it")
    return _ok(name, checked)


def check_orphans(log: EventLog) -> VerdictReport:
    name = "orphan_free"
    cps = latest_checkpoints(log)
    checked = 0
    for send, recv in _app_messages(log):
        if recv is None:
            continue
        i, j = send.node, recv.node
        if i not in cps or j not in cps:
            continue
        checked += 1
        if recv.seq < cps[j].taken.seq and send.seq > cps[i].taken.seq:
            return _fail(
                name, checked, [send.seq, recv.seq, cps[i].taken.seq, cps[j].taken.seq],
                f"message {send.data[0]} received before node {j}'s checkpoint but sent after node {i}'s",
            )
    return _ok(name, checked)


def check_phase2_safety(log: EventLog) -> VerdictReport:
    """Within each connected initiator network, every initiator determined its
    group before any of them left phase 2."""
    name = "phase2_safety"
    determined: dict[int, Event] = {}
    exited: dict[int, Event] = {}
    adj: dict[int, set] = defaultdict(set)
    for e in log.events:
        if e.etype == ev.DETERMINED:
            determined.setdefault(e.node, e)
        elif e.etype == ev.PHASE2_OUT:
            exited.setdefault(e.node, e)
            adj[e.node]
            for j in e.data[1]:
                adj[e.node].add(j)
                adj[j].add(e.node)
    seen: set = set()
    comps = 0
    for start in sorted(adj):
        if start in seen:
            continue
        comp, q = [], deque([start])
        seen.add(start)
        while q:
            u = q.popleft()
            comp.append(u)
            for v in sorted(adj[u]):
                if v not in seen:
                    seen.add(v)
                    q.append(v)
        comps += 1
        missing = [u for u in comp if u not in determined]
        if missing:
            first = min(exited[u].seq for u in comp if u in exited)
            return _fail(name, comps, [first], f"initiators {missing} never determined a group yet a neighbour left phase 2")
        last_det = max((determined[u] for u in comp), key=lambda e: e.seq)
        exits = [exited[u] for u in comp if u in exited]
        if not exits:
            continue
        first_exit = min(exits, key=lambda e: e.seq)
        if first_exit.seq < last_det.seq:
            return _fail(
                name, comps, [first_exit.seq, last_det.seq],
                f"node {first_exit.node} left phase 2 (round {first_exit.round}) before node {last_det.node} determined its group (round {last_det.round})",
            )
    return _ok(name, comps)


def check_app_fifo(log: EventLog) -> VerdictReport:
    """Per ordered pair, application messages are received in send order, once."""
    name = "app_fifo"
    log = prefix_before(log, ev.RB_STOP)
    sent: dict[tuple, list] = defaultdict(list)
    got: dict[tuple, list] = defaultdict(list)
    for e in log.events:
        if e.etype == ev.SEND:
            sent[(e.node, e.data[1])].append(e.data[0])
        elif e.etype == ev.RECEIVE:
            got[(e.data[1], e.node)].append(e.data[0])
    for link, ids in sorted(got.items()):
        if ids != sent[link][: len(ids)]:
            return _fail(name, len(got), [], f"link {link}: receive order {ids[:8]} differs from send order")
    return _ok(name, len(got))


def check_snapshot(log: EventLog, algorithm: str = "cps") -> VerdictReport:
    """All snapshot checks, on the part of the log before any rollback."""
    log = prefix_before(log, ev.RB_STOP)
    clocks = assign_clocks(log)
    rep = check_checkpoint_concurrency(log, clocks)
    rep = rep.merge(check_in_transit(log)).merge(check_orphans(log)).merge(check_app_fifo(log))
    if algorithm == "cps":
        rep = rep.merge(check_phase2_safety(log))
    return rep


# -- rollback -------------------------------------------------------------


def _state_at(log: EventLog, node: int, upto_seq: int) -> tuple[int, int, int]:
    sent = received = digest = 0
    for e in log.events:
        if e.seq >= upto_seq:
            break
        if e.node != node:
            continue
        if e.etype == ev.SEND:
            sent += 1
        elif e.etype == ev.RECEIVE:
            received += 1
            digest = fold_digest(digest, e.data[0])
    return sent, received, digest


def check_rollback(log: EventLog, checkpoints: Optional[dict] = None, final_states: Optional[dict] = None) -> VerdictReport:
    """Every restored member is back at its committed checkpoint, and the
    restored cut plus post-restore deliveries loses and duplicates nothing.

    ``checkpoints`` (node -> CheckpointRecord) and ``final_states``
    (node -> (sent, received, digest) right after restore) are optional
    cross-checks against what the nodes themselves hold.
    """
    name = "rollback"
    restored = {e.node: e for e in log.of_type(ev.RESTORED)}
    stops = {e.node: e for e in log.of_type(ev.RB_STOP)}
    if not restored:
        return _fail(name, 0, [], "no completed rollback in the log")
    if set(stops) != set(restored):
        lost = sorted(set(stops) - set(restored))
        return _fail(name, 0, [stops[n].seq for n in lost], f"nodes {lost} stopped but never restored")
    first_stop = min(e.seq for e in stops.values())
    pre = EventLog([e for e in log.events if e.seq < first_stop])
    cps = latest_checkpoints(pre)
    members = set(restored)

    def cut(node: int) -> int:
        return cps[node].taken.seq if node in cps else -1

    for node, r in sorted(restored.items()):
        expect = _state_at(log, node, cut(node)) if node in cps else (0, 0, 0)
        if tuple(r.data[1]) != expect:
            return _fail(name, len(members), [r.seq], f"node {node} restored {tuple(r.data[1])}, checkpoint holds {expect}")
        if checkpoints is not None:
            cp = checkpoints.get(node)
            held = (cp.local_state.sent, cp.local_state.received, cp.local_state.digest) if cp else (0, 0, 0)
            if held != expect:
                return _fail(name, len(members), [r.seq], f"node {node} stores a checkpoint that differs from the log")
        if final_states is not None and tuple(final_states[node]) != expect:
            return _fail(name, len(members), [r.seq], f"node {node} final state differs from its checkpoint")
        rb_list = set(r.data[3])
        if not rb_list <= members:
            return _fail(name, len(members), [r.seq], f"node {node} waited on non-members {sorted(rb_list - members)}")

    sends: dict[int, Event] = {}
    recvs: dict[int, list[Event]] = defaultdict(list)
    for e in log.events:
        if e.etype == ev.SEND:
            sends[e.data[0]] = e
        elif e.etype == ev.RECEIVE:
            recvs[e.data[0]].append(e)

    checked = 0
    for m, s in sorted(sends.items()):
        i, j = s.node, s.data[1]
        rs = recvs.get(m, [])
        if i not in members and j not in members:
            continue
        checked += 1
        if j in members:
            before_cut = [x for x in rs if x.seq < cut(j)]
            after_restore = [x for x in rs if x.seq > restored[j].seq]
            between = [x for x in rs if cut(j) < x.seq < restored[j].seq]
            if i in members:
                sent_in_cut = s.seq < cut(i)
                if before_cut and not sent_in_cut:
                    return _fail(name, checked, [s.seq, before_cut[0].seq], f"message {m} is an orphan of the restored cut")
                want = 1 if (sent_in_cut and not before_cut) else 0
                if s.seq > restored[i].seq:
                    continue  # fresh traffic after the restore
                if len(after_restore) != want:
                    return _fail(
                        name, checked, [s.seq] + [x.seq for x in rs],
                        f"message {m} ({i}->{j}) delivered {len(after_restore)} times after restore, expected {want}",
                    )
            else:
                if between:
                    return _fail(name, checked, [s.seq, between[0].seq], f"message {m} from non-member {i} was undone at {j}")
                if not before_cut and len(after_restore) != 1:
                    return _fail(name, checked, [s.seq], f"message {m} from non-member {i} delivered {len(after_restore)} times after restore")
        elif i in members and cut(i) < s.seq < stops[i].seq and rs:
            return _fail(name, checked, [s.seq, rs[0].seq], f"message {m} to non-member {j} is unsent by the rollback of {i}")
    return _ok(name, checked)


# -- trace files ----------------------------------------------------------


def read_trace(lines: Iterable[str]) -> tuple[EventLog, dict]:
    """Parse a JSON-lines trace into the event log plus any scenario header."""
    records = []
    meta: dict = {}
    for line in lines:
        line = line.strip()
        if not line:
            continue
        raw = json.loads(line)
        kind = raw.get("record", "event")
        if kind == "event":
            records.append(raw)
        elif kind == "scenario":
            meta = raw
    return EventLog.from_records(records), meta


def check_trace(lines: Iterable[str]) -> VerdictReport:
    log, meta = read_trace(lines)
    algorithm = meta.get("algorithm") or "cps"
    rep = check_snapshot(log, algorithm)
    if log.of_type(ev.RB_STOP):
        rep = rep.merge(check_rollback(log))
    return rep
