import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from reference_data import PLANTS  # noqa: E402

from prtune.lti import TransferFunction  # noqa: E402

_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def plants():
    return {k: TransferFunction.from_dict(v) for k, v in PLANTS.items()}


@pytest.fixture(scope="session")
def acceptance_log():
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
