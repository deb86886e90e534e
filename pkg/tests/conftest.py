import os
import sys
import warnings

import pytest

sys.path.insert(0, os.path.dirname(__file__))

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def desk_config():
    from nlskam.config import parse_config
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return parse_config({})


@pytest.fixture(scope="session")
def desk_run(desk_config):
    """The default desk-scale run, shared by every test that needs it."""
    from nlskam.engine import run
    return run(desk_config)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
