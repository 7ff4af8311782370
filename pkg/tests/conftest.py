"""Shared pytest plumbing for the test suite.

The acceptance tests append one PASS/FAIL line per criterion to
``ACCEPTANCE_LINES``; the hook below replays them in a dedicated section
of the terminal summary so the verdicts are visible without ``-s``.
"""

ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, ok: bool, detail: str) -> str:
    line = f"criterion {number} {'PASS' if ok else 'FAIL'}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return line


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
