import numpy as np
import pytest

from barrier_wave.linear import closed_form_data, example13_data


@pytest.fixture(scope="session")
def example_data():
    return example13_data()


def polynomial_data(phi0, phi0_prime, phi1, radius=50.0):
    """Data given by callables, cut off far outside any test region."""
    return closed_form_data(phi0, phi1, phi0_prime, radius)


def zeros(x):
    return np.zeros_like(np.asarray(x, dtype=float))
