import pytest

ACCEPTANCE = {}


@pytest.fixture
def record():
    """Store the one-line outcome of an acceptance criterion."""
    def _record(number: int, ok: bool, detail: str):
        ACCEPTANCE[number] = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        return ok
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
