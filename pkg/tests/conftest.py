import pytest

# (criterion number, description, passed, detail) gathered by the acceptance
# suite; printed as one line per criterion after the run.
_ACCEPTANCE_RESULTS = []


@pytest.fixture
def acceptance():
    def record(criterion: int, description: str, passed: bool, detail: str = ""):
        _ACCEPTANCE_RESULTS.append((criterion, description, bool(passed), detail))

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, description, passed, detail in sorted(_ACCEPTANCE_RESULTS):
        status = "PASS" if passed else "FAIL"
        line = f"criterion {criterion}: {status} - {description}"
        if detail:
            line += f" [{detail}]"
        terminalreporter.write_line(line)
