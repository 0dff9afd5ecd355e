import pytest


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running Monte-Carlo criterion")


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
