import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    """Record one [PASS]/[FAIL] line for an acceptance criterion, then assert it."""

    def report(cid: str, ok: bool, detail: str) -> None:
        line = f"[{'PASS' if ok else 'FAIL'}] {cid}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split("] C")[1].split()[0])):
            terminalreporter.write_line(line)
