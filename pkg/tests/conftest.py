import pytest

_VERDICTS: dict[int, str] = {}


def record(criterion: int, ok: bool, detail: str) -> bool:
    """Store one PASS/FAIL line for the terminal summary and echo it."""
    line = f"criterion {criterion:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    _VERDICTS[criterion] = line
    print(line)
    return ok


@pytest.fixture
def verdict():
    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_VERDICTS):
        terminalreporter.write_line(_VERDICTS[k])
