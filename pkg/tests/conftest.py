"""Shared pytest wiring for the suite.

The acceptance tests record their verdicts here; the terminal-summary hook
echoes one line per criterion after capture is torn down, so the verdicts
appear in the pytest log whatever the capture mode.
"""

ACCEPTANCE_VERDICTS = []  # (criterion id, passed) in execution order


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_VERDICTS:
        return
    grouped = {}
    for cid, ok in ACCEPTANCE_VERDICTS:
        root = cid.split("[", 1)[0]
        grouped[root] = grouped.get(root, True) and ok
    terminalreporter.ensure_newline()
    terminalreporter.section("acceptance criteria", sep="-")
    for cid, ok in grouped.items():
        verdict = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"ACCEPTANCE {cid} {verdict}")
