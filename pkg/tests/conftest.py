import pytest

from mlmcfv import SolverConfig, buckley_leverett, experiment1, experiment2


@pytest.fixture(scope="session")
def bl():
    return buckley_leverett()


@pytest.fixture(scope="session")
def cfg(bl):
    return SolverConfig(flux=bl, lam=0.2, t_end=0.2)


@pytest.fixture(scope="session")
def exp1():
    return experiment1()


@pytest.fixture(scope="session")
def exp2():
    return experiment2()
