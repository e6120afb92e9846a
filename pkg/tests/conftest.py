import pytest

_VERDICTS: dict[int, str] = {}


@pytest.fixture
def verdict():
    """Record and print one PASS/FAIL line for an acceptance criterion, then assert it."""

    def _verdict(n: int, ok: bool, detail: str = ""):
        line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}" + (f"  {detail}" if detail else "")
        _VERDICTS[n] = line
        print(line)
        assert ok, line

    return _verdict


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_VERDICTS):
            terminalreporter.write_line(_VERDICTS[n])
