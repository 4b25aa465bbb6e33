import sys
import time
from collections import OrderedDict
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

SUITE_BUDGET_S = 300.0

# criterion number -> (title, list of (test id, passed))
_criteria: "OrderedDict[int, tuple[str, list]]" = OrderedDict()
_started = time.perf_counter()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by a test")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    entry = _criteria.setdefault(number, (title, []))
    if call.when == "call" or (call.when == "setup" and call.excinfo is not None):
        entry[1].append((item.nodeid, call.excinfo is None))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _criteria:
        return
    elapsed = time.perf_counter() - _started
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_criteria):
        title, results = _criteria[number]
        failed = [nodeid for nodeid, ok in results if not ok]
        status = "PASS" if results and not failed else "FAIL"
        tr.write_line(f"[{status}] criterion {number}: {title} ({len(results) - len(failed)}/{len(results)} checks)")
        for nodeid in failed:
            tr.write_line(f"         failed: {nodeid}")
    budget = "PASS" if elapsed < SUITE_BUDGET_S else "FAIL"
    tr.write_line(f"[{budget}] session wall-clock {elapsed:.1f} s (budget {SUITE_BUDGET_S:.0f} s)")


def pytest_sessionfinish(session, exitstatus):
    if _criteria and time.perf_counter() - _started >= SUITE_BUDGET_S and exitstatus == 0:
        session.exitstatus = pytest.ExitCode.TESTS_FAILED
