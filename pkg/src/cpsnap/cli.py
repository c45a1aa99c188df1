"""Command line: run, sweep, check, report."""

from __future__ import annotations

import argparse
import os
import sys

from . import checker
from .experiments import SweepSpec, report, run_sweep, write_results
from .sim import Scenario, Simulator, WorkloadConfig


def _workload(args) -> WorkloadConfig:
    if not args.app_send_prob:
        return WorkloadConfig()
    return WorkloadConfig(
        enabled=True,
        app_send_prob=args.app_send_prob,
        active_rounds=(1, args.active_rounds),
        warmup_rounds=args.warmup_rounds,
    )


def write_trace(path: str, scenario: Scenario, algorithm: str) -> None:
    result = Simulator(scenario, algorithm, trace=True).run()
    with open(path, "w") as fh:
        for line in result.trace_lines(scenario, algorithm):
            fh.write(line + "\n")


def cmd_run(args) -> int:
    algorithms = ("cps", "css") if args.algorithm == "both" else (args.algorithm,)
    spec = SweepSpec(
        param="N",
        values=[args.nodes],
        fixed={"N": args.nodes, "C": args.comm_prob, "F": args.init_prob},
        iterations=args.iterations,
        seed_base=args.seed_base,
        algorithms=algorithms,
        workload=_workload(args),
        workers=args.workers,
    )
    result = run_sweep(spec)
    paths = write_results(result, args.out)
    if args.trace:
        tdir = os.path.join(args.out, "traces")
        os.makedirs(tdir, exist_ok=True)
        for it in result.iterations:
            if it.ok:
                sc = spec.scenario(args.nodes, it.iteration)
                write_trace(os.path.join(tdir, f"{it.algorithm}_{it.iteration:04d}.jsonl"), sc, it.algorithm)
    print(report(args.out))
    for it in result.failures():
        print(f"failed: {it.algorithm} iteration {it.iteration}: {it.error}", file=sys.stderr)
    print(f"wrote {paths['runs.csv']}")
    return 0


def cmd_sweep(args) -> int:
    spec = SweepSpec.from_file(args.config)
    if args.workers:
        spec.workers = args.workers
    result = run_sweep(spec)
    paths = write_results(result, args.out)
    print(report(args.out))
    print(f"wrote {paths['runs.csv']}")
    return 0


def cmd_check(args) -> int:
    with open(args.trace) as fh:
        verdict = checker.check_trace(fh)
    print(verdict.to_json())
    return 0 if verdict.passed else 1


def cmd_report(args) -> int:
    print(report(args.input))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cpsnap", description="Partial snapshot simulations and checks.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one parameter point for K seeded iterations")
    r.add_argument("--algorithm", choices=["cps", "css", "both"], default="both")
    r.add_argument("--nodes", type=int, default=200)
    r.add_argument("--comm-prob", type=float, default=0.1)
    r.add_argument("--init-prob", type=float, default=0.1)
    r.add_argument("--iterations", type=int, default=100)
    r.add_argument("--seed-base", type=int, default=0)
    r.add_argument("--out", required=True)
    r.add_argument("--trace", action="store_true", help="also write one JSON-lines trace per run")
    r.add_argument("--app-send-prob", type=float, default=0.0, help="0 disables the application workload")
    r.add_argument("--active-rounds", type=int, default=40)
    r.add_argument("--warmup-rounds", type=int, default=5)
    r.add_argument("--workers", type=int, default=1)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="run a sweep described by a JSON config")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--workers", type=int, default=0)
    s.set_defaults(func=cmd_sweep)

    c = sub.add_parser("check", help="check a JSON-lines trace and print the verdict")
    c.add_argument("--trace", required=True)
    c.set_defaults(func=cmd_check)

    rep = sub.add_parser("report", help="summarise a results directory")
    rep.add_argument("--in", dest="input", required=True)
    rep.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
