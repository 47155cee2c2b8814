import pytest

ACCEPTANCE = {}


@pytest.fixture
def record():
    """Store a one-line acceptance verdict printed in the terminal summary."""
    def _record(number, passed, detail):
        ACCEPTANCE[number] = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        return passed
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])
