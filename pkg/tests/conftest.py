import time

from _helpers import ACCEPTANCE

SUITE_BUDGET_S = 120.0
_start = time.perf_counter()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    elapsed = time.perf_counter() - _start
    tr = terminalreporter
    if ACCEPTANCE:
        tr.section("acceptance criteria")
        for name, passed, detail in ACCEPTANCE:
            status = "N/A " if passed is None else "PASS" if passed else "FAIL"
            tr.write_line(f"{status}  {name}: {detail}")
    ok = elapsed < SUITE_BUDGET_S
    tr.write_line(f"{'PASS' if ok else 'FAIL'}  full suite runtime: {elapsed:.1f} s (budget {SUITE_BUDGET_S:.0f} s)")


def pytest_sessionfinish(session, exitstatus):
    if time.perf_counter() - _start >= SUITE_BUDGET_S and exitstatus == 0:
        session.exitstatus = 1
