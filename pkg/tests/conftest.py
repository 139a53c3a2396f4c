import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from poolsim.network import make_grid  # noqa: E402


@pytest.fixture(scope="session")
def grid3():
    return make_grid(3, 3, 500.0)


@pytest.fixture(scope="session")
def grid5():
    return make_grid(5, 5, 500.0)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
