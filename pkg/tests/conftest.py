import pytest


class AcceptanceLog:
    """Collects one pass/fail line per end-to-end check so the terminal
    summary shows the whole scoreboard in one block."""

    def __init__(self):
        self.lines = []

    def record(self, label: str, ok: bool, detail: str) -> bool:
        line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
        self.lines.append(line)
        print(line)
        return ok


_LOG = AcceptanceLog()


@pytest.fixture(scope="session")
def acceptance():
    return _LOG


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _LOG.lines:
        terminalreporter.section("acceptance checks")
        for line in _LOG.lines:
            terminalreporter.write_line(line)
