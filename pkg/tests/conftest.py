"""Shared acceptance-criterion reporting.

Each acceptance test wraps its body in `criterion(...)`; the collected
PASS/FAIL lines are echoed in a terminal section after the run so the
verdicts survive output capture.
"""

from contextlib import contextmanager

CRITERION_LINES: list[str] = []


@contextmanager
def criterion(name: str):
    try:
        yield
    except BaseException:
        CRITERION_LINES.append(f"FAIL: {name}")
        print(f"FAIL: {name}", flush=True)
        raise
    else:
        CRITERION_LINES.append(f"PASS: {name}")
        print(f"PASS: {name}", flush=True)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in CRITERION_LINES:
            terminalreporter.write_line(line)
