import numpy as np
import pytest

from resistkit.ensembles import random_connected_network


@pytest.fixture
def path3():
    """Unit path 0-1-2 with unit masses."""
    from resistkit.network import Network
    return Network.from_edges([(0, 1, 1.0), (1, 2, 1.0)])


@pytest.fixture
def triangle():
    from resistkit.network import Network
    return Network.from_edges([(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)])


def pinv_resistance(net):
    """Independent oracle: R(x,y) from the Moore-Penrose pseudoinverse."""
    L = net.laplacian_dense()
    M = np.linalg.pinv(L)
    d = np.diag(M)
    return d[:, None] + d[None, :] - 2 * M


def dirichlet_inverse(net, A):
    """Independent oracle: inverse of the Laplacian with A's rows/cols deleted."""
    idx = [i for i, v in enumerate(net.ids) if v not in set(A)]
    L = net.laplacian_dense()
    return np.linalg.inv(L[np.ix_(idx, idx)])


def corpus(count, max_n=50, seed0=100, unit=False):
    rng = np.random.default_rng(seed0)
    nets = []
    for k in range(count):
        n = int(rng.integers(2, max_n + 1))
        nets.append(random_connected_network(n, seed=seed0 + k, unit=unit))
    return nets
