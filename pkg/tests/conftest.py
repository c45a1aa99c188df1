import pytest

from cpsnap.sim import Scenario, Simulator, WorkloadConfig


def busy(app_send_prob=0.2, active=(1, 40), warmup=5):
    return WorkloadConfig(enabled=True, app_send_prob=app_send_prob, active_rounds=active, warmup_rounds=warmup)


def run(scenario, algorithm="cps", **kw):
    return Simulator(scenario, algorithm, **kw).run()


def run_edges(n, edges, initiators, algorithm="cps", workload=None, **kw):
    sc = Scenario(n, topology_override=edges, initiators_override=initiators, workload=workload or WorkloadConfig())
    return Simulator(sc, algorithm, **kw).run()


def sent(result, kind):
    return [e for _seq, e in result.envelopes if e.kind.value == kind]


@pytest.fixture
def small_busy():
    return Scenario(20, 0.1, 0.2, 3, busy())


VERDICTS: list = []


def verdict(number: int, ok: bool, detail: str) -> None:
    """Record one acceptance line; the test then asserts ``ok`` itself."""
    VERDICTS.append(f"{'PASS' if ok else 'FAIL'} criterion {number:>2}: {detail}")
    print(VERDICTS[-1])


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(VERDICTS, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
