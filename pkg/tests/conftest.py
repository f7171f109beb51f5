import numpy as np
import pytest

import fluxcontrol as fc


@pytest.fixture(scope="session")
def karate():
    """Bundled karate club adjacency and its diffusive system."""
    adj, labels = fc.karate_club_adjacency()
    return {"adj": adj, "labels": labels, "system": fc.laplacian_system(adj, label="karate")}


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
