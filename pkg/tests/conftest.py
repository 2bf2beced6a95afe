import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None)
settings.load_profile("default")

# Acceptance results, printed as one line per criterion at the end of the run.
CRITERIA: dict[int, tuple[bool, str]] = {}


def record(number: int, ok: bool, detail: str) -> None:
    CRITERIA[number] = (ok, detail)
    print(f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}")


@pytest.fixture
def criterion():
    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        ok, detail = CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
