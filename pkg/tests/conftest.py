import math

import pytest

from cdwn.topology import PlacementParams, generate_perturbed_grid, generate_regular


def field_params(n_side=15, n_users=None, n_backhaul=10):
    """Jittered-grid constants used throughout: 100 m pitch, 50 m jitter."""
    n = n_side * n_side
    return PlacementParams(n_bs=n, n_users=4 * n if n_users is None else n_users, r_min=50.0,
                           r_max=75.0 * math.sqrt(2), d_min=10.0, k_max=8,
                           n_backhaul=n_backhaul, cell_pitch=100.0)


@pytest.fixture(scope="session")
def grid12():
    return generate_regular(12, 100.0, 25.0, 1)


@pytest.fixture(scope="session")
def field15():
    return generate_perturbed_grid(field_params(), 50.0, 1)
