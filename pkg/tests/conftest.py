import pytest

_RESULTS: dict[int, tuple[str, str, str]] = {}


@pytest.fixture
def acceptance():
    """``record(number, title, passed, detail)``; ``passed=None`` marks a skip."""

    def record(number: int, title: str, passed, detail: str = "") -> None:
        status = "SKIP" if passed is None else ("PASS" if passed else "FAIL")
        _RESULTS[number] = (status, title, detail)
        print(f"criterion {number:2d} {status}: {title} | {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        status, title, detail = _RESULTS[number]
        terminalreporter.write_line(f"criterion {number:2d} {status}: {title} | {detail}")
