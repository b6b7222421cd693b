import sys
from pathlib import Path

import pytest

from ipsmom.model import ModelParams

sys.path.insert(0, str(Path(__file__).parent))

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def base_params():
    return ModelParams(n=3, alpha=0.3, pi_plus=0.9, pi_minus=0.4, link="mean")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
