import numpy as np
import pytest

from proxysynth.solver import fixture_block_matrix


@pytest.fixture(scope="session")
def bmat():
    return fixture_block_matrix()


@pytest.fixture
def rng():
    return np.random.default_rng(20260808)
