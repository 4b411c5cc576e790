import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_line():
    def record(number, title, passed, detail):
        line = f"criterion {number} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
        print(line)
        ACCEPTANCE_LINES.append(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
