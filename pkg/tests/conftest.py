import pytest

ACCEPTANCE_LINES: list[tuple[str, bool, str]] = []


@pytest.fixture
def record():
    """Record one acceptance line: record(label, ok, detail)."""

    def _rec(label: str, ok: bool, detail: str = "") -> bool:
        ACCEPTANCE_LINES.append((label, bool(ok), detail))
        return ok

    return _rec


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in ACCEPTANCE_LINES:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label:<58} {detail}")
