"""Synchronous-round simulator: FIFO links, next-round delivery, seeded scenarios."""

from __future__ import annotations

import json
import random
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional

from . import events as ev
from .cps import CpsNode
from .css import CssNode
from .events import EventLog
from .messages import Envelope, Kind, NodeId
from .metrics import RunMetrics, initiator_network_stats

DEFAULT_ROUND_CAP = 10**6


class RoundLimitExceeded(RuntimeError):
    """The run did not reach quiescence within the round cap."""


class Stalled(RoundLimitExceeded):
    """Nothing is in flight, yet some instance never terminated."""


@dataclass
class WorkloadConfig:
    enabled: bool = False
    app_send_prob: float = 0.1
    active_rounds: tuple[int, int] = (1, 40)  # [first, last] rounds with app sends
    warmup_rounds: int = 0  # rounds of traffic before the initiators start
    new_peer_prob: float = 0.0  # chance a send goes to a random node outside the relation

    def active(self, round_: int) -> bool:
        return self.enabled and self.active_rounds[0] <= round_ <= self.active_rounds[1]


@dataclass
class RollbackPlan:
    """Trigger a rollback ``delay`` rounds after every snapshot instance finished."""

    node: Optional[NodeId] = None  # defaults to the smallest initiator
    delay: int = 3


@dataclass
class Scenario:
    n: int
    comm_prob: float = 0.1
    init_prob: float = 0.1
    seed: int = 0
    workload: WorkloadConfig = field(default_factory=WorkloadConfig)
    topology_override: Optional[list] = None  # explicit undirected edge list
    initiators_override: Optional[list] = None
    rollback: Optional[RollbackPlan] = None

    def to_json(self) -> str:
        raw = asdict(self)
        raw["workload"]["active_rounds"] = list(self.workload.active_rounds)
        return json.dumps(raw, sort_keys=True)

    @classmethod
    def from_dict(cls, raw: dict) -> "Scenario":
        raw = dict(raw)
        wl = dict(raw.pop("workload", None) or {})
        if "active_rounds" in wl:
            wl["active_rounds"] = tuple(wl["active_rounds"])
        rb = raw.pop("rollback", None)
        topo = raw.pop("topology_override", None)
        return cls(
            workload=WorkloadConfig(**wl),
            rollback=None if rb is None else RollbackPlan(**rb),
            topology_override=None if topo is None else [tuple(e) for e in topo],
            **raw,
        )

    @classmethod
    def from_json(cls, text: str) -> "Scenario":
        return cls.from_dict(json.loads(text))


def generate_relation(n: int, comm_prob: float, rng: random.Random) -> list[tuple[int, int]]:
    if not 0.0 <= comm_prob <= 1.0:
        raise ValueError("comm_prob must lie in [0, 1]")
    return [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < comm_prob]


def pick_initiators(n: int, init_prob: float, rng: random.Random) -> list[int]:
    if not 0.0 <= init_prob <= 1.0:
        raise ValueError("init_prob must lie in [0, 1]")
    return [i for i in range(n) if rng.random() < init_prob]


def line_edges(n: int) -> list[tuple[int, int]]:
    return [(i, i + 1) for i in range(n - 1)]


def complete_edges(n: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


NODE_CLASSES = {"cps": CpsNode, "css": CssNode}


@dataclass
class RunResult:
    log: EventLog
    metrics: RunMetrics
    nodes: dict
    initiators: list
    edges: list
    envelopes: list  # (link_seq, Envelope) in send order, when tracing
    network: dict
    rollback_node: Optional[int] = None

    def trace_lines(self, scenario: Optional[Scenario] = None, algorithm: str = "") -> Iterable[str]:
        if scenario is not None:
            yield json.dumps({"record": "scenario", "algorithm": algorithm, "scenario": json.loads(scenario.to_json())}, sort_keys=True)
        for seq, env in self.envelopes:
            raw = json.loads(env.to_json())
            raw["record"] = "envelope"
            raw["link_seq"] = seq
            yield json.dumps(raw, sort_keys=True)
        for node in sorted(self.nodes):
            cp = self.nodes[node].checkpoint
            if cp is not None:
                yield json.dumps(
                    {
                        "record": "checkpoint",
                        "node": node,
                        "instance": cp.instance.to_json(),
                        "state": [cp.local_state.sent, cp.local_state.received, cp.local_state.digest],
                        "in_transit": [list(t) for t in cp.in_transit],
                    },
                    sort_keys=True,
                )
        yield from self.log.to_jsonl()


class Simulator:
    def __init__(
        self,
        scenario: Scenario,
        algorithm: str = "cps",
        round_cap: int = DEFAULT_ROUND_CAP,
        trace: bool = False,
        hold_collided_links: bool = True,
    ):
        if algorithm not in NODE_CLASSES:
            raise ValueError(f"unknown algorithm {algorithm!r}")
        self.scenario = scenario
        self.algorithm = algorithm
        self.round_cap = round_cap
        self.trace = trace
        self.log = EventLog()
        rng = random.Random(scenario.seed)
        n = scenario.n
        if scenario.topology_override is not None:
            self.edges = sorted((min(a, b), max(a, b)) for a, b in scenario.topology_override)
        else:
            self.edges = generate_relation(n, scenario.comm_prob, rng)
        if scenario.initiators_override is not None:
            self.initiators = sorted(scenario.initiators_override)
        else:
            self.initiators = pick_initiators(n, scenario.init_prob, rng)
        self.wl_rng = random.Random(f"{scenario.seed}:workload")
        cls = NODE_CLASSES[algorithm]
        self.nodes = {i: cls(i, self.log, hold_collided_links) for i in range(n)}
        self.peers: dict[int, list[int]] = defaultdict(list)
        for a, b in self.edges:
            self.nodes[a].DS.add(b)
            self.nodes[b].DS.add(a)
            self.peers[a].append(b)
            self.peers[b].append(a)
        self.round = 0
        self.init_round = 1 + (scenario.workload.warmup_rounds if scenario.workload.enabled else 0)
        self.inflight: dict[int, list] = defaultdict(list)
        self.link_seq: dict[tuple[int, int], int] = defaultdict(int)
        self.pending_inflight = 0
        self.metrics = RunMetrics(group_count=0)
        self.envelopes: list = []
        self.next_msg_id = 0
        self.snapshot_done_round: Optional[int] = None
        self.rollback_node: Optional[int] = None
        self.rollback_fired = scenario.rollback is None

    # -- plumbing ---------------------------------------------------------

    def _collect(self, node) -> None:
        for env in node.drain():
            key = (env.sender, env.dest)
            seq = self.link_seq[key]
            self.link_seq[key] = seq + 1
            self.inflight[self.round + 1].append((env.dest, env.sender, 1, seq, env))
            self.pending_inflight += 1
            self.metrics.count(env.category, env.kind.value)
            if self.trace:
                self.envelopes.append((seq, env))

    def _touch(self, node) -> None:
        node.round = self.round

    def _all_idle(self) -> bool:
        return all(node.idle for node in self.nodes.values())

    # -- one round --------------------------------------------------------

    def step_round(self) -> int:
        """Advance one round; returns the number of envelopes delivered."""
        self.round += 1
        r = self.round
        touched = set()

        if r == self.init_round:
            for i in self.initiators:
                node = self.nodes[i]
                self._touch(node)
                node.initiate()
                self.metrics.group_count += 1
                touched.add(i)
        if not self.rollback_fired and self.snapshot_done_round is not None:
            if r >= self.snapshot_done_round + self.scenario.rollback.delay:
                plan = self.scenario.rollback
                target = plan.node if plan.node is not None else (self.initiators[0] if self.initiators else 0)
                node = self.nodes[target]
                self._touch(node)
                node.rb_initiate()
                self.rollback_node = target
                self.rollback_fired = True
                touched.add(target)

        due = self.inflight.pop(r, [])
        self.pending_inflight -= len(due)
        by_dest: dict[int, list] = defaultdict(list)
        for item in due:
            by_dest[item[0]].append(item[1:])
        for d, node in self.nodes.items():
            if getattr(node, "reinject", None):
                by_dest.setdefault(d, [])
        for d in sorted(by_dest):
            node = self.nodes[d]
            self._touch(node)
            inbox = sorted(by_dest[d], key=lambda t: (t[0], t[1], t[2]))
            pos = 0
            while True:
                extra = getattr(node, "reinject", None)
                if extra:
                    node.reinject = []
                    front = [(e.sender, 0, k, e) for k, e in enumerate(extra)]
                    inbox = sorted(front + inbox[pos:], key=lambda t: (t[0], t[1], t[2]))
                    pos = 0
                if pos >= len(inbox):
                    break
                env = inbox[pos][3]
                pos += 1
                node.deliver(env)
            touched.add(d)

        wl = self.scenario.workload
        if wl.active(r):
            for i in range(self.scenario.n):
                node = self.nodes[i]
                if self.wl_rng.random() >= wl.app_send_prob or node.app_stopped:
                    continue
                dest = self._pick_dest(i)
                if dest is None:
                    continue
                self._touch(node)
                node.app_send(dest, self.next_msg_id)
                self.next_msg_id += 1
                touched.add(i)

        for i in sorted(touched):
            self._collect(self.nodes[i])

        if self.snapshot_done_round is None and r >= self.init_round and self._all_idle():
            self.snapshot_done_round = r
        return len(due)

    def _pick_dest(self, i: int) -> Optional[int]:
        wl = self.scenario.workload
        n = self.scenario.n
        if n < 2:
            return None
        if wl.new_peer_prob and self.wl_rng.random() < wl.new_peer_prob:
            j = self.wl_rng.randrange(n - 1)
            return j if j < i else j + 1
        peers = self.peers.get(i)
        if not peers:
            return None
        return peers[self.wl_rng.randrange(len(peers))]

    def quiescent(self) -> bool:
        r = self.round
        if r < self.init_round or not self.rollback_fired:
            return False
        if self.pending_inflight or self.scenario.workload.active(r + 1):
            return False
        return self._all_idle()

    def run(self) -> RunResult:
        while not self.quiescent():
            if self.round >= self.round_cap:
                raise RoundLimitExceeded(f"no quiescence after {self.round_cap} rounds")
            self.step_round()
            if (
                not self.pending_inflight
                and self.round >= self.init_round
                and not self.scenario.workload.active(self.round + 1)
                and self.rollback_fired
                and not self._all_idle()
            ):
                stuck = sorted(i for i, nd in self.nodes.items() if not nd.idle)
                raise Stalled(f"round {self.round}: nodes {stuck[:10]} wait with nothing in flight")
        return self._finish()

    def _finish(self) -> RunResult:
        m = self.metrics
        terms = self.log.of_type(ev.TERMINATED)
        m.total_rounds = (max(e.round for e in terms) - self.init_round + 1) if terms else 0
        m.total_collisions = sum(nd.collisions_seen for nd in self.nodes.values())
        m.per_node_processed = {i: nd.processed for i, nd in self.nodes.items()}
        size, network = initiator_network_stats(self.log, self.algorithm)
        m.initiator_network_size = size
        return RunResult(
            log=self.log,
            metrics=m,
            nodes=self.nodes,
            initiators=list(self.initiators),
            edges=list(self.edges),
            envelopes=self.envelopes,
            network=network,
            rollback_node=self.rollback_node,
        )


def run(scenario: Scenario, algorithm: str = "cps", **kwargs) -> RunResult:
    return Simulator(scenario, algorithm, **kwargs).run()
