import numpy as np
import pytest

from egse import bivariate_theta
from egse.data_io import bundled_path, load_csv
from egse.links import parse_links


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def swiss_logit():
    links = parse_links("logit,logit")
    data = load_csv(bundled_path("swiss.csv"), ["education", "agriculture"], links)
    return data, links


@pytest.fixture
def theta2():
    return bivariate_theta(0.3, -0.2, 1.1, 0.8, 0.4, 1.2, -0.7, 0.5)


def random_theta(rng, n, kind=None, lam_scale=1.5, tau_range=(-0.5, 1.0)):
    """Random parameters with a well-conditioned dispersion matrix."""
    from egse import GAUSSIAN, Theta

    a = rng.normal(size=(n, n))
    sigma = a @ a.T / n + np.diag(rng.uniform(0.3, 1.0, n))
    return Theta(rng.normal(scale=0.5, size=n), sigma, rng.normal(scale=lam_scale, size=n),
                 rng.uniform(*tau_range), kind or GAUSSIAN)
