"""Per-run measurements and the initiator-network size metrics."""

from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass, field

from . import events as ev
from .events import EventLog
from .messages import MessageCategory

SNAPSHOT_CATEGORIES = (
    MessageCategory.MARKER,
    MessageCategory.NORMAL,
    MessageCategory.COLLISION,
    MessageCategory.INITIATOR_NETWORK,
)


@dataclass
class RunMetrics:
    total_messages: int = 0
    messages_by_category: dict = field(default_factory=lambda: {c: 0 for c in SNAPSHOT_CATEGORIES})
    app_messages: int = 0
    total_rounds: int = 0
    total_collisions: int = 0
    group_count: int = 0
    initiator_network_size: int = 0
    per_node_processed: dict = field(default_factory=dict)
    messages_by_kind: dict = field(default_factory=dict)

    def count(self, category: MessageCategory, kind_name: str) -> None:
        if category is MessageCategory.APPLICATION:
            self.app_messages += 1
            return
        self.total_messages += 1
        self.messages_by_category[category] += 1
        self.messages_by_kind[kind_name] = self.messages_by_kind.get(kind_name, 0) + 1


def top_k_load(metrics: RunMetrics, k: int) -> list[tuple[int, int]]:
    if k < 1:
        raise ValueError("k must be at least 1")
    ranked = sorted(metrics.per_node_processed.items(), key=lambda kv: (-kv[1], kv[0]))
    return ranked[:k]


def top_k_share(metrics: RunMetrics, k: int) -> float:
    """Fraction of all processed protocol messages handled by the k busiest nodes."""
    total = sum(metrics.per_node_processed.values())
    if total == 0:
        return 0.0
    return sum(c for _n, c in top_k_load(metrics, k)) / total


def _bfs_far(adj: dict, src) -> dict:
    dist = {src: 0}
    q = deque([src])
    while q:
        u = q.popleft()
        for v in adj.get(u, ()):
            if v not in dist:
                dist[v] = dist[u] + 1
                q.append(v)
    return dist


def graph_diameter(adj: dict) -> int:
    """Largest eccentricity over all connected components (0 when edgeless)."""
    best = 0
    for u in adj:
        best = max(best, max(_bfs_far(adj, u).values()))
    return best


def tree_depth(parent: dict) -> int:
    """Levels on the longest root-to-leaf path; a lone root counts as size 0."""
    if not parent:
        return 0
    best = 0
    for u in parent:
        d, v, seen = 1, u, {u}
        while v in parent:
            v = parent[v]
            if v in seen:
                raise ValueError("parent pointers form a cycle")
            seen.add(v)
            d += 1
        best = max(best, d)
    return best


def initiator_network_stats(log: EventLog, algorithm: str) -> tuple[int, dict]:
    """Size metric plus an adjacency/parent dump of the final initiator network.

    cps: diameter over the neighbour links each initiator reported when
    leaving phase 2. css: depth of the main/sub-initiator tree.
    """
    if algorithm == "cps":
        adj: dict = defaultdict(set)
        for e in log.of_type(ev.PHASE2_OUT):
            adj[e.node]  # noqa: B018 - keep isolated initiators
            for j in e.data[1]:
                adj[e.node].add(j)
                adj[j].add(e.node)
        adj = {k: sorted(v) for k, v in sorted(adj.items())}
        return graph_diameter(adj), adj
    if algorithm == "css":
        parent = {}
        for e in log.of_type(ev.SUBORDINATED):
            parent[e.node] = e.data[1]
        return tree_depth(parent), dict(sorted(parent.items()))
    raise ValueError(f"unknown algorithm {algorithm!r}")
