import pytest

ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def verdict():
    """Record a one-line PASS/FAIL verdict for an acceptance criterion."""

    def record(number: int, ok: bool, detail: str) -> bool:
        ACCEPTANCE[number] = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(ACCEPTANCE[number])
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
