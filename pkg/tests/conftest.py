import pytest

_VERDICTS: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    """Record a pass/fail line for one acceptance criterion, then assert it."""

    def record(n: int, ok: bool, detail: str):
        _VERDICTS[n] = (bool(ok), detail)
        print(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, f"criterion {n}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_VERDICTS):
        ok, detail = _VERDICTS[n]
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
