import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def record():
    """Record one acceptance line; it is echoed now and again in the terminal summary."""
    def _record(num, ok, detail):
        line = f"CRITERION {num:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append((num, line))
        print(line)
        return ok
    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
