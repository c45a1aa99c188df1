"""Time the compiled and pure-Python vector-clock kernels on the same inputs.

Run: python benchmarks/bench_vclock.py [--events 20000] [--nodes 50] [--repeat 3]
"""

from __future__ import annotations

import argparse
import random
import timeit

import numpy as np

from cpsnap import _vclock_py

try:
    from cpsnap import _vclock as _compiled
except ImportError:
    _compiled = None


def random_history(events: int, nodes: int, seed: int = 0):
    """Sends and receives on random channels; every receive has an earlier send."""
    rng = random.Random(seed)
    node = np.zeros(events, dtype=np.int64)
    kind = np.zeros(events, dtype=np.int64)
    ref = np.full(events, -1, dtype=np.int64)
    pending: dict[int, list] = {}
    for e in range(events):
        p = rng.randrange(nodes)
        node[e] = p
        box = pending.get(p)
        if box and rng.random() < 0.5:
            kind[e] = 2
            ref[e] = box.pop(rng.randrange(len(box)))
        elif rng.random() < 0.6:
            kind[e] = 1
            pending.setdefault(rng.randrange(nodes), []).append(e)
    return node, kind, ref


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--events", type=int, default=20000)
    ap.add_argument("--nodes", type=int, default=50)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    node, kind, ref = random_history(args.events, args.nodes)
    backends = [("python", _vclock_py)] + ([("cython", _compiled)] if _compiled else [])
    clocks = {}
    rows = []
    for name, mod in backends:
        t_assign = min(timeit.repeat(lambda: mod.assign(node, kind, ref, args.nodes), number=1, repeat=args.repeat))
        clocks[name] = mod.assign(node, kind, ref, args.nodes)
        # checkpoint-like rows: the last event of each node, which are pairwise concurrent only by chance
        last = {int(p): e for e, p in enumerate(node)}
        picks = sorted(last.values())
        sub = np.ascontiguousarray(clocks[name][picks])
        owners = np.array([int(node[e]) for e in picks], dtype=np.int64)
        t_scan = min(timeit.repeat(lambda: mod.first_precedence(sub, owners), number=1, repeat=args.repeat))
        rows.append((name, t_assign, t_scan))

    print(f"events={args.events} nodes={args.nodes} repeat={args.repeat}")
    print(f"{'backend':>8} {'assign s':>10} {'scan s':>10}")
    for name, ta, ts in rows:
        print(f"{name:>8} {ta:>10.4f} {ts:>10.6f}")
    if len(rows) == 2:
        print(f"speedup assign x{rows[0][1] / rows[1][1]:.1f}, scan x{rows[0][2] / max(rows[1][2], 1e-9):.1f}")
        print("identical clocks:", bool(np.array_equal(clocks["python"], clocks["cython"])))
    else:
        print("compiled kernel not built; only the fallback was timed")


if __name__ == "__main__":
    main()
