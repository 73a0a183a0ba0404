import numpy as np
import pytest

from risbc.channel import LinkParams
from risbc.config import ScenarioConfig
from risbc.single_tag import SingleTagLinks

# PASS/FAIL lines collected by the acceptance suite, echoed at the end of the run
ACCEPTANCE_LINES = []


def record(name, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def default_cfg():
    return ScenarioConfig()


@pytest.fixture
def table2_links():
    return ScenarioConfig().links()


@pytest.fixture
def mixed_links():
    # different shapes on every hop so that no term can hide behind symmetry
    return SingleTagLinks(LinkParams(2.0, 6.0), LinkParams(4.0, 3.0), LinkParams(1.5, 2.5), LinkParams(3.5, 4.0))
