import pytest

_LINES: dict = {}


@pytest.fixture
def acceptance():
    """Record one verdict line per acceptance criterion."""

    def record(number: int, name: str, ok: bool, detail: str = "") -> bool:
        _LINES[number] = f"[{'PASS' if ok else 'FAIL'}] {number:>2} {name}: {detail}"
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_LINES):
        terminalreporter.write_line(_LINES[n])
