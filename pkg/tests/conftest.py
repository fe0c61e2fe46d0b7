import warnings

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def ring35():
    """n = 3, tau = 0.5 ring at the midpoint of the embedded window, 201 x 401."""
    from serrin.ring_domain import ring_domain

    fld, bounds = ring_domain(3, 0.5, nx=201, ny=401)
    return fld, bounds


@pytest.fixture(scope="session")
def ring35_small():
    from serrin.ring_domain import ring_domain

    fld, bounds = ring_domain(3, 0.5, nx=81, ny=161)
    return fld


@pytest.fixture(scope="session")
def dev35():
    from serrin.ring_domain import build_ring_map

    return build_ring_map(3, 0.5)


@pytest.fixture(scope="session")
def band05():
    from serrin.band_domain import band_solution

    return band_solution(0.5)


@pytest.fixture(scope="session")
def flat():
    from serrin.band_domain import flat_band

    return flat_band(81, 161)


@pytest.fixture(autouse=True)
def _quiet_rank_warning():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="rank-deficient spectral fit")
        yield
