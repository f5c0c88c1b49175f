from __future__ import annotations

import _criteria


def pytest_terminal_summary(terminalreporter):
    if _criteria.LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_criteria.LINES, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
