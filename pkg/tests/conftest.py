import functools
import time

import pytest

from orbitswarm.config import load_scenario
from orbitswarm.sim import monitor_report, run_scenario

ACCEPTANCE_LINES = []


@functools.lru_cache(maxsize=None)
def preset_run(name, seed=0):
    """Run a shipped preset once per session; returns ``(result, summary, seconds)``."""
    sc = load_scenario(name)
    t0 = time.perf_counter()
    res = run_scenario(sc, seed)
    return res, monitor_report(res), time.perf_counter() - t0


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def report():
    def _report(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return _report
