import numpy as np
import pytest

from largesol.nonlinearity import Nonlinearity
from largesol.solver import BlowUp, Dirichlet, Geometry, ProblemSpec, make_grid


@pytest.fixture(scope="session")
def cubic():
    return Nonlinearity.power(3)


@pytest.fixture(scope="session")
def classical_spec(cubic):
    """u'' = u^3 on (0, 1) with blow-up at 0; sqrt(2)/x is exact."""
    return ProblemSpec(Geometry.interval(0.0, 1.0), cubic,
                       {"left": BlowUp(), "right": Dirichlet(np.sqrt(2.0))})


@pytest.fixture(scope="session")
def classical_grid(classical_spec):
    return make_grid(classical_spec, 2000)
