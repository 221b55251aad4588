"""Shared pytest plumbing: collects acceptance-criterion verdict lines and
prints them in the terminal summary so every run shows one line per
criterion."""

ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
