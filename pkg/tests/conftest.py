"""Collects the acceptance-criterion pass/fail lines and prints them as a
summary section at the end of the run, where output capture cannot hide
them."""

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
