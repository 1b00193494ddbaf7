"""Echo acceptance verdicts into the terminal summary.

The release-gate tests record one PASS/FAIL line each. Default pytest
capture swallows plain prints, so a summary hook replays the lines after
the run where they are always visible.
"""

import sys


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    for name in ("tests.test_acceptance", "test_acceptance"):
        module = sys.modules.get(name)
        if module is not None:
            break
    lines = getattr(module, "VERDICTS", []) if module is not None else []
    if lines:
        terminalreporter.section("acceptance verdicts")
        for line in lines:
            terminalreporter.write_line(line)
