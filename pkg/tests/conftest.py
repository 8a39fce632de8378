import numpy as np
import pytest

from qfact import hilbert


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def std_basis_2():
    return hilbert.basis_observable("A", 2)


@pytest.fixture
def mixing_basis_2():
    h = np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2)
    return hilbert.ObservableSpec("B", np.array([-1.0, 1.0]), h)
