"""Echo the acceptance-criterion verdict lines after the test summary."""

CRITERION_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(
            CRITERION_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])
        ):
            terminalreporter.write_line(line)
