"""Parameter sweeps over N, C and F: per-iteration CSV rows plus per-point means."""

from __future__ import annotations

import csv
import json
import os
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .messages import MessageCategory
from .metrics import RunMetrics, top_k_share
from .sim import DEFAULT_ROUND_CAP, RoundLimitExceeded, Scenario, Simulator, WorkloadConfig

ALGORITHMS = ("cps", "css")
PARAMS = {"N": "n", "C": "comm_prob", "F": "init_prob"}

CSV_COLUMNS = [
    "algorithm", "param", "value", "iteration", "total_messages", "marker_msgs", "normal_msgs",
    "collision_msgs", "initnet_msgs", "rounds", "collisions", "groups", "initnet_size",
]
METRIC_COLUMNS = CSV_COLUMNS[4:]
FAILURE_COLUMNS = ["algorithm", "param", "value", "iteration", "error"]

RUNS_FILE = "runs.csv"
SUMMARY_FILE = "summary.csv"
FAILURES_FILE = "failures.csv"


@dataclass
class SweepSpec:
    param: str = "N"
    values: list = field(default_factory=lambda: [50, 100, 150, 200])
    fixed: dict = field(default_factory=lambda: {"N": 200, "C": 0.1, "F": 0.1})
    iterations: int = 100
    seed_base: int = 0
    algorithms: tuple = ALGORITHMS
    workload: Optional[WorkloadConfig] = None
    round_cap: int = DEFAULT_ROUND_CAP
    workers: int = 1

    def __post_init__(self) -> None:
        if self.param not in PARAMS:
            raise ValueError(f"param must be one of {sorted(PARAMS)}")
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if not self.values:
            raise ValueError("values must not be empty")
        bad = [a for a in self.algorithms if a not in ALGORITHMS]
        if bad:
            raise ValueError(f"unknown algorithms {bad}")
        self.algorithms = tuple(self.algorithms)

    def scenario(self, value, iteration: int) -> Scenario:
        """Both algorithms get this exact scenario for a given (value, iteration)."""
        knobs = {PARAMS[k]: v for k, v in self.fixed.items() if k in PARAMS}
        knobs[PARAMS[self.param]] = value
        knobs["n"] = int(knobs.get("n", 200))
        return Scenario(
            seed=self.seed_base + iteration,
            workload=self.workload or WorkloadConfig(),
            **knobs,
        )

    @classmethod
    def from_dict(cls, raw: dict) -> "SweepSpec":
        raw = dict(raw)
        wl = raw.pop("workload", None)
        if wl is not None:
            wl = dict(wl)
            if "active_rounds" in wl:
                wl["active_rounds"] = tuple(wl["active_rounds"])
            wl = WorkloadConfig(**wl)
        if "algorithms" in raw:
            raw["algorithms"] = tuple(raw["algorithms"])
        return cls(workload=wl, **raw)

    @classmethod
    def from_file(cls, path: str) -> "SweepSpec":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class IterationResult:
    algorithm: str
    param: str
    value: object
    iteration: int
    metrics: Optional[RunMetrics] = None
    error: str = ""

    @property
    def ok(self) -> bool:
        return self.metrics is not None

    def row(self) -> list:
        m = self.metrics
        cat = m.messages_by_category
        return [
            self.algorithm, self.param, self.value, self.iteration, m.total_messages,
            cat[MessageCategory.MARKER], cat[MessageCategory.NORMAL], cat[MessageCategory.COLLISION],
            cat[MessageCategory.INITIATOR_NETWORK], m.total_rounds, m.total_collisions,
            m.group_count, m.initiator_network_size,
        ]


@dataclass
class SweepResult:
    spec: SweepSpec
    iterations: list  # IterationResult, in (value, iteration, algorithm) order

    def of(self, algorithm: str, value=None) -> list:
        return [r for r in self.iterations if r.algorithm == algorithm and (value is None or r.value == value)]

    def failures(self) -> list:
        return [r for r in self.iterations if not r.ok]

    def summary(self) -> list[dict]:
        out = []
        for value in self.spec.values:
            for alg in self.spec.algorithms:
                done = [r for r in self.of(alg, value) if r.ok]
                row = {"algorithm": alg, "param": self.spec.param, "value": value,
                       "completed": len(done), "failed": len(self.of(alg, value)) - len(done)}
                for col, idx in zip(METRIC_COLUMNS, range(4, len(CSV_COLUMNS))):
                    row[col] = statistics.fmean(r.row()[idx] for r in done) if done else float("nan")
                row["top2_share"] = statistics.fmean(top_k_share(r.metrics, 2) for r in done) if done else float("nan")
                out.append(row)
        return out


def run_iteration(spec: SweepSpec, algorithm: str, value, iteration: int) -> IterationResult:
    res = IterationResult(algorithm, spec.param, value, iteration)
    try:
        res.metrics = Simulator(spec.scenario(value, iteration), algorithm, round_cap=spec.round_cap).run().metrics
    except RoundLimitExceeded as exc:
        res.error = f"{type(exc).__name__}: {exc}"
    return res


def run_sweep(spec: SweepSpec) -> SweepResult:
    jobs = [(alg, v, i) for v in spec.values for i in range(spec.iterations) for alg in spec.algorithms]
    if spec.workers > 1:
        with ThreadPoolExecutor(spec.workers) as pool:
            results = list(pool.map(lambda j: run_iteration(spec, *j), jobs))
    else:
        results = [run_iteration(spec, *j) for j in jobs]
    return SweepResult(spec, results)


def _fmt(x) -> str:
    return repr(x) if isinstance(x, float) else str(x)


def write_csv(path: str, header: list, rows: Iterable[list]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def write_results(result: SweepResult, out_dir: str) -> dict:
    os.makedirs(out_dir, exist_ok=True)
    paths = {name: os.path.join(out_dir, name) for name in (RUNS_FILE, SUMMARY_FILE, FAILURES_FILE)}
    write_csv(paths[RUNS_FILE], CSV_COLUMNS, (r.row() for r in result.iterations if r.ok))
    summary = result.summary()
    header = list(summary[0]) if summary else []
    write_csv(paths[SUMMARY_FILE], header, ([row[k] for k in header] for row in summary))
    write_csv(
        paths[FAILURES_FILE], FAILURE_COLUMNS,
        ([r.algorithm, r.param, r.value, r.iteration, r.error] for r in result.failures()),
    )
    return paths


def read_runs(path: str) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        for col in ["iteration"] + METRIC_COLUMNS:
            row[col] = int(row[col])
    return rows


def report(in_dir: str) -> str:
    """Plain-text table of per-point means, with the CPS/CSS message ratio."""
    rows = read_runs(os.path.join(in_dir, RUNS_FILE))
    points: dict = {}
    for row in rows:
        points.setdefault((row["param"], row["value"]), {}).setdefault(row["algorithm"], []).append(row)
    lines = [f"{'param':>5} {'value':>8} {'alg':>4} {'runs':>5} {'messages':>10} {'rounds':>9} {'collisions':>10} {'groups':>7} {'initnet':>7}"]
    for (param, value), by_alg in sorted(points.items(), key=lambda kv: (kv[0][0], float(kv[0][1]))):
        means = {}
        for alg in sorted(by_alg):
            got = by_alg[alg]
            m = {c: statistics.fmean(r[c] for r in got) for c in METRIC_COLUMNS}
            means[alg] = m
            lines.append(
                f"{param:>5} {value:>8} {alg:>4} {len(got):>5} {m['total_messages']:>10.1f} {m['rounds']:>9.1f} "
                f"{m['collisions']:>10.1f} {m['groups']:>7.2f} {m['initnet_size']:>7.2f}"
            )
        if "cps" in means and "css" in means and means["css"]["total_messages"]:
            ratio = means["cps"]["total_messages"] / means["css"]["total_messages"]
            lines.append(f"{'':>5} {'':>8} cps/css message ratio {ratio:.3f}")
    return "\n".join(lines)
