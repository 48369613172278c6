import numpy as np
import pytest

from ccgeo.examples import EpsilonFamily, make_epsilon_chart, make_warped_ah_chart

# filled by the acceptance tests, echoed at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def g0():
    return make_epsilon_chart(EpsilonFamily(0.0))


@pytest.fixture(scope="session")
def g05():
    return make_epsilon_chart(EpsilonFamily(0.5))


@pytest.fixture(scope="session")
def g1():
    return make_epsilon_chart(EpsilonFamily(1.0))


@pytest.fixture(scope="session")
def g1q():
    return make_epsilon_chart(EpsilonFamily(1.0, rho_quad=1.0))


@pytest.fixture(scope="session")
def warped():
    return make_warped_ah_chart()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
