import numpy as np
import pytest

from mqreg import DgpSpec, dgp_sample


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance: full-scale acceptance criteria (slow)"
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20250810)


@pytest.fixture(scope="session")
def shift_data_1000():
    """One location-shift sample, n=1000, shared across read-only tests."""
    return dgp_sample(DgpSpec(), 1000, np.random.default_rng(99))


def random_design(rng, n, w):
    """Intercept plus standard-normal columns."""
    cols = [np.ones(n)]
    for _ in range(w - 1):
        cols.append(rng.standard_normal(n))
    return np.column_stack(cols)
