"""Collects acceptance verdicts and prints one line per criterion at session end."""

import pytest

VERDICTS = {}


@pytest.fixture
def verdict():
    def record(number: int, title: str, ok: bool, detail: str = ""):
        VERDICTS[number] = (title, bool(ok), detail)
        print(f"{'PASS' if ok else 'FAIL'} criterion {number}: {title} {detail}")
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(VERDICTS):
        title, ok, detail = VERDICTS[number]
        terminalreporter.write_line(
            f"{'PASS' if ok else 'FAIL'} [{number:2d}] {title}: {detail}")
