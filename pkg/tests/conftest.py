import pytest

from nlslab.fgr import solve_gamma
from nlslab.linearization import solve_mode


@pytest.fixture(scope="session")
def mode_p2():
    return solve_mode(2.0)


@pytest.fixture(scope="session")
def res_p2(mode_p2):
    return solve_gamma(mode_p2)
