import numpy as np
import pytest

from sgdnet.core import ActivationKind, NetworkParams
from sgdnet.data import SeparableSpec, generate_separable


def make_params(w_rows, u_rows, v=1.0, activation=None):
    W = np.vstack([np.atleast_2d(w_rows), np.atleast_2d(u_rows)]).astype(float)
    return NetworkParams(W, v, activation or ActivationKind.leaky_relu(0.5))


@pytest.fixture
def leaky():
    return ActivationKind.leaky_relu(0.5)


@pytest.fixture
def relu():
    return ActivationKind.relu()


@pytest.fixture(scope="session")
def small_separable():
    return generate_separable(SeparableSpec(d=5, n=60, norm_wstar_target=3.0, seed=7))
