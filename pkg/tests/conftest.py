import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def record_criterion():
    def record(tag: str, passed: bool | None, detail: str = ""):
        status = "SKIP" if passed is None else "PASS" if passed else "FAIL"
        ACCEPTANCE_LINES.append(f"{status}  {tag}  {detail}".rstrip())
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
