import sys


def pytest_terminal_summary(terminalreporter):
    # stdout inside tests is captured; re-emit the acceptance checklist so a
    # plain `pytest -v` run still shows one line per release property
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "GATE_LINES", None)
    if lines:
        terminalreporter.section("acceptance checklist")
        for line in lines:
            terminalreporter.write_line(line)
