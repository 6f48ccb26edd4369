import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from masspart import measure as M

settings.register_profile("masspart", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("masspart")

# filled by test_acceptance; echoed after the run so the lines survive output capture
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def square():
    return M.uniform_box(4000, 2, seed=11)


@pytest.fixture(scope="session")
def cube():
    return M.uniform_box(4000, 3, seed=12)


@pytest.fixture(scope="session")
def sym2():
    # centrally symmetric about the origin
    return M.symmetrize(M.gaussian(2000, 2, seed=13))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
