import numpy as np
import pytest

from qfa.qdft import qdft
from qfa.simulate import SimConfig, simulate_pair


@pytest.fixture(scope="session")
def small_levels():
    return np.linspace(0.1, 0.9, 9)


@pytest.fixture(scope="session")
def small_series():
    return simulate_pair(SimConfig(n=64, seed=2024))


@pytest.fixture(scope="session")
def small_qdft(small_series, small_levels):
    return qdft(small_series, small_levels, tol=1e-9, max_iter=100)
