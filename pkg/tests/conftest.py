"""Shared pytest plumbing: the acceptance-criteria summary block.

Acceptance tests append one line per criterion; the hook prints them
after the test run so the verdicts survive output capture.
"""

CRITERION_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in CRITERION_LINES:
            terminalreporter.write_line(line)
