import numpy as np
import pytest

from accdngd.graphs import gen_erdos_renyi, laplacian_weights
from accdngd.objectives import gen_case1, gen_case3


@pytest.fixture(scope="session")
def er20():
    g = gen_erdos_renyi(20, 0.3, np.random.default_rng(20))
    return laplacian_weights(g)


@pytest.fixture(scope="session")
def case1_20():
    return gen_case1(20, rng=101)


@pytest.fixture(scope="session")
def case3_20():
    return gen_case3(20, rng=103)


@pytest.fixture(scope="session")
def x0_20():
    return np.random.default_rng(7).normal(0.0, 5.0, (20, 3))


_VERDICTS = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_VERDICTS] = []


@pytest.fixture(scope="session")
def verdicts(request):
    """Collects one ``criterion ...: PASS|FAIL`` line per acceptance check."""
    return request.config.stash[_VERDICTS]


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
