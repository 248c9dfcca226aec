from __future__ import annotations

import pytest

_LINES: list[str] = []


class CriterionLog:
    """Records one PASS/FAIL line per acceptance criterion."""

    def record(self, label: str, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'} {label}: {detail}"
        _LINES.append(line)
        print(line)
        return ok

    def info(self, label: str, detail: str) -> None:
        line = f"INFO {label}: {detail}"
        _LINES.append(line)
        print(line)


@pytest.fixture(scope="session")
def criterion():
    return CriterionLog()


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
