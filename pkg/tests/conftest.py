import pytest

CRITERIA: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    """``criterion(k, ok, detail)`` records and prints one verdict line, then asserts."""

    def _record(k: int, ok: bool, detail: str):
        CRITERIA[k] = (bool(ok), detail)
        print(f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail}")
        assert ok, detail

    return _record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(CRITERIA):
        ok, detail = CRITERIA[k]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail}")
