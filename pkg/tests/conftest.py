import os

# Quiet progress bars before grouplab.config reads the environment
os.environ.setdefault("GROUPLAB_PROGRESS", "0")

import numpy as np
import pytest

from grouplab.activations import Activation
from grouplab.groupkit import abelian_irreps, dihedral_irreps, make_cyclic, make_dihedral


@pytest.fixture
def z5():
    return make_cyclic(5)


@pytest.fixture
def z11():
    return make_cyclic(11)


@pytest.fixture
def d4():
    return make_dihedral(4)


@pytest.fixture
def z11_catalog():
    return abelian_irreps([11])


@pytest.fixture
def d4_catalog():
    return dihedral_irreps(4)


@pytest.fixture
def quadratic():
    return Activation("quadratic")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def output_dir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path / "runs"


def fd_gradient(f, x, step=1e-6):
    """Central differences of a scalar function, one coordinate at a time"""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        keep = x[idx]
        x[idx] = keep + step
        up = f(x)
        x[idx] = keep - step
        down = f(x)
        x[idx] = keep
        grad[idx] = (up - down) / (2 * step)
    return grad


@pytest.fixture
def fd():
    return fd_gradient
