import numpy as np
import pytest

from invariant_kahler.config import SolveConfig
from invariant_kahler.ot_solver import solve_transport

GROUPS = ["A1", "A2", "B2", "G2", "A3"]


@pytest.fixture(scope="session")
def a1_run():
    """A1, u = 0, eps = 0, k = 1, m = 200, grid 4096."""
    spec = SolveConfig(group="A1").validate().density_spec()
    return solve_transport(spec, 1.0, 200, 4096)


@pytest.fixture(scope="session")
def a2_run():
    """A2, u = 0, eps = 1/2, k = 2, m = 600, grid 256."""
    spec = SolveConfig(group="A2").validate().density_spec().with_regularization(0.5)
    return solve_transport(spec, 2.0, 600, 256)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
