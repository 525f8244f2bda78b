"""Shared test plumbing: acceptance-criterion result reporting."""

CRITERION_RESULTS: list[str] = []


def record_criterion(line: str) -> None:
    """Register one acceptance pass/fail line for the terminal summary."""
    CRITERION_RESULTS.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if CRITERION_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in CRITERION_RESULTS:
            terminalreporter.write_line(line)
