# tests/conftest.py
import numpy as np
import pytest

from core.bound_states import build_family
from core.lattice import LatticeGrid, SpinorField, make_rng, random_field
from core.spectral import full_spectrum
from core.walk import NonlinearCoin, build_coin

SMALL_L = 64


@pytest.fixture(scope="session")
def grid():
    return LatticeGrid(SMALL_L)


@pytest.fixture(scope="session")
def kls_coin(grid):
    return build_coin("kls-origin", grid)


@pytest.fixture(scope="session")
def spectral(kls_coin):
    return full_spectrum(kls_coin)


@pytest.fixture(scope="session")
def cubic():
    return NonlinearCoin.from_choice("sigma3", 1.0, 3)


@pytest.fixture(scope="session")
def family(spectral, cubic):
    """g(s) = s³ 的束缚态族"""
    return build_family(spectral, cubic)


@pytest.fixture(scope="session")
def family_p1(spectral):
    """g(s) = s 的束缚态族，标度更明显"""
    return build_family(spectral, NonlinearCoin.from_choice("sigma3", 1.0, 1))


@pytest.fixture
def rng():
    return make_rng(1234)


def random_unit(grid: LatticeGrid, rng, width: float = None) -> SpinorField:
    u = random_field(grid, rng, width)
    return u / u.norm()


def max_abs(a, b) -> float:
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))
