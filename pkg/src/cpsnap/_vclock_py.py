"""Pure-Python vector-clock kernels; same contract as the compiled module."""

from __future__ import annotations

import numpy as np


def assign(node, kind, ref, n: int) -> np.ndarray:
    """Label events with vector clocks.

    node[e] is the owning node, kind[e] is 0 (local), 1 (send) or 2 (receive),
    and ref[e] is the index of the matching send for a receive. Every event
    advances its own node's component; a receive also takes the pointwise max
    with the clock of its send.
    """
    count = len(node)
    out = np.zeros((count, n), dtype=np.int32)
    last = [None] * n
    for e in range(count):
        p = int(node[e])
        row = [0] * n if last[p] is None else list(last[p])
        if kind[e] == 2:
            r = int(ref[e])
            if r < 0 or r >= e:
                raise ValueError(f"receive event {e} has no earlier send")
            src = out[r]
            for k in range(n):
                if src[k] > row[k]:
                    row[k] = int(src[k])
        row[p] += 1
        out[e] = row
        last[p] = row
    return out


def first_precedence(clocks: np.ndarray, owners) -> tuple[int, int] | None:
    """First ordered pair (a, b) of rows with row a causally before row b.

    For events on distinct nodes, a precedes b exactly when b has seen a's
    own component: clocks[b, owner(a)] >= clocks[a, owner(a)].
    """
    k = len(owners)
    for a in range(k):
        oa = int(owners[a])
        own = clocks[a, oa]
        for b in range(k):
            if a != b and owners[b] != oa and clocks[b, oa] >= own:
                return a, b
    return None
