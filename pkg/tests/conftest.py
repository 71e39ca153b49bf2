import numpy as np
import pytest

from coxmra import SarhSpec, SpatialGrid, TimeGrid, default_variance_profile

# Ten-component reference eigenvalue systems used across the test suite.
LAMBDA1 = np.array([0.300, 0.270, 0.230, 0.200, 0.170, 0.130, 0.100, 0.030, 0.010, 0.005])
LAMBDA2 = np.array([0.500, 0.470, 0.430, 0.400, 0.370, 0.330, 0.300, 0.230, 0.200, 0.150])


@pytest.fixture(scope="session")
def reference_spec():
    """Coupled ten-component model on a depth-4 time grid."""
    return SarhSpec(
        eigenvalues1=LAMBDA1,
        eigenvalues2=LAMBDA2,
        innovation_variances=default_variance_profile(LAMBDA1, LAMBDA2),
        time=TimeGrid(4),
        couple_l3=True,
    )


@pytest.fixture
def small_grid():
    return SpatialGrid(8, 8)
