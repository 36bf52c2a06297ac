import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# the small matrix used by several hand-worked examples
PHI3 = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]])


@pytest.fixture
def phi3():
    from mfrecon.measurement import MeasurementMatrix

    return MeasurementMatrix(PHI3.copy())


def two_node_system(kind="logistic", r=(2.0, 2.0), alpha=1.0):
    """A[2][1] = 1 only, diffusive alpha (x_i - x_j)."""
    from mfrecon.dynamics import Coupling, IsolatedMap, NetworkSystem
    from mfrecon.graph import Graph

    a = np.array([[0, 0], [1, 0]])
    w = np.array([[0.0, 0.0], [alpha, 0.0]])
    return NetworkSystem(Graph(a), IsolatedMap(kind, np.array(r, dtype=float)), Coupling("diffusive", w, sign=-1))
