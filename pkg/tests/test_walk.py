# tests/test_walk.py
import numpy as np
import pytest

from core.errors import DomainError, GridMismatchError
from core.lattice import LatticeGrid, SpinorField, proj_pm, random_field, zigzag
from core.walk import (CoinField, NonlinearCoin, apply_A, apply_DN, apply_DN_inv, apply_L, apply_L_inv,
                       apply_N, apply_U, apply_U_inv, build_coin, dense_U, double_step, shift, shift_inv,
                       step)
from tests.conftest import random_unit

TOL = 1e-14
TOL_OP = 1e-13
TOL_FD = 1e-8

GRID = LatticeGrid(32)


@pytest.fixture(scope="module")
def coin():
    return build_coin("smooth-tail", GRID)


@pytest.fixture(scope="module")
def nc():
    return NonlinearCoin.from_choice("sigma3", 1.0, 3)


def test_presets():
    for name in ("kls-origin", "free", "identity", "smooth-tail"):
        c = build_coin(name, GRID)
        assert c.preset == name
    with pytest.raises(DomainError):
        build_coin("unknown", GRID)
    free = build_coin("free", GRID)
    assert free.perturbation_size() == pytest.approx(0.0, abs=1e-14)
    assert build_coin("kls-origin", GRID).perturbation_size() > 0


def test_coin_validation():
    n = GRID.n_sites
    with pytest.raises(DomainError):
        CoinField(GRID, np.zeros(n), np.full(n, 0.9), np.full(n, 0.9), 0.6, 0.8)
    with pytest.raises(GridMismatchError):
        CoinField(GRID, np.zeros(n - 1), np.full(n - 1, 0.6), np.full(n - 1, 0.8), 0.6, 0.8)
    with pytest.raises(DomainError):
        CoinField(GRID, np.zeros(n), np.full(n, 0.6), np.full(n, 0.8), 1.0, 0.0)


def test_coin_rows_roundtrip(coin):
    restored = CoinField.from_rows(coin.to_rows(), coin.alpha_inf, coin.beta_inf)
    np.testing.assert_allclose(restored.matrices, coin.matrices, rtol=0, atol=TOL)


def test_shift_is_inverted(rng):
    u = random_field(GRID, rng)
    assert (shift_inv(shift(u)) - u).norm() <= TOL
    moved = shift(SpinorField.delta(GRID, 0, (1.0, 2.0)))
    np.testing.assert_allclose(moved.at(1), [1.0, 0.0])
    np.testing.assert_allclose(moved.at(-1), [0.0, 2.0])


def test_unitarity(coin, nc, rng):
    u = random_field(GRID, rng)
    assert abs(apply_U(coin, u).norm() - u.norm()) <= TOL * u.norm() * 10
    assert abs(apply_N(nc, u).norm() - u.norm()) <= TOL * u.norm() * 10
    np.testing.assert_allclose(apply_N(nc, u).site_norms(), u.site_norms(), rtol=1e-14, atol=0)
    assert (apply_U_inv(coin, apply_U(coin, u)) - u).norm() <= TOL_OP * u.norm()


def test_dense_matrix_agrees(coin, rng):
    u = random_field(GRID, rng)
    dense = dense_U(coin) @ u.flat()
    np.testing.assert_allclose(dense, apply_U(coin, u).flat(), rtol=0, atol=TOL_OP)
    U = dense_U(coin)
    np.testing.assert_allclose(U.conj().T @ U, np.eye(GRID.dim), rtol=0, atol=TOL_OP)


def test_chiral_anticommutation(coin, rng):
    u = random_field(GRID, rng)
    residual = (apply_U(coin, zigzag(u)) + zigzag(apply_U(coin, u))).norm()
    assert residual <= TOL * 10


def test_intertwining(coin, nc, rng):
    u = random_unit(GRID, rng, width=6.0) * 0.5
    assert (apply_U(coin, proj_pm(u, "+")) - proj_pm(apply_U(coin, u), "-")).norm() <= TOL_OP
    assert (apply_N(nc, proj_pm(u, "+")) - proj_pm(apply_N(nc, u), "+")).norm() <= TOL
    assert (double_step(coin, nc, proj_pm(u, "+")) - proj_pm(double_step(coin, nc, u), "+")).norm() <= TOL_OP
    assert proj_pm(double_step(coin, nc, proj_pm(u, "+")), "-").norm() <= TOL_OP


@pytest.mark.parametrize("theta", [0.3, 1.7, np.pi])
def test_gauge_covariance(nc, rng, theta):
    u = random_unit(GRID, rng, width=6.0)
    phase = np.exp(1j * theta)
    assert (apply_N(nc, phase * u) - phase * apply_N(nc, u)).norm() <= TOL_OP


def test_linear_nonlinearity_is_identity(rng):
    u = random_field(GRID, rng)
    linear = NonlinearCoin.from_choice("sigma3", 0.0, 3)
    assert (apply_N(linear, u) - u).norm() == 0.0


def test_nonlinear_coin_validation():
    with pytest.raises(DomainError):
        NonlinearCoin(np.array([[0.0, 1.0], [0.0, 0.0]]), 1.0, 3)
    with pytest.raises(DomainError):
        NonlinearCoin.from_choice("sigma3", 1.0, 0)
    with pytest.raises(DomainError):
        NonlinearCoin.from_choice("sigma2", 1.0, 3)


@pytest.mark.parametrize("gamma", ["sigma3", "sigma1", "identity"])
def test_A_is_nilpotent(gamma, rng):
    nc = NonlinearCoin.from_choice(gamma, 1.0, 2)
    w = random_unit(GRID, rng, width=6.0)
    u = random_field(GRID, rng)
    assert apply_A(nc, w, apply_A(nc, w, u)).norm() <= TOL * 10 * max(1.0, u.norm())


def test_DN_matches_finite_differences(nc, rng):
    w = random_unit(GRID, rng, width=6.0)
    u = random_unit(GRID, rng, width=6.0)
    h = 1e-5
    fd = (apply_N(nc, w + h * u) - apply_N(nc, w - h * u)) / (2.0 * h)
    assert (fd - apply_DN(nc, w, u)).norm() <= TOL_FD


def test_DN_inverse(nc, rng):
    w = random_unit(GRID, rng, width=6.0)
    u = random_field(GRID, rng)
    assert (apply_DN_inv(nc, w, apply_DN(nc, w, u)) - u).norm() <= 1e-12 * u.norm()


def test_L_is_linearized_double_step(coin, nc, rng):
    Phi = proj_pm(random_unit(GRID, rng, width=6.0), "+") * 0.5
    xi = proj_pm(random_unit(GRID, rng, width=6.0), "+")
    h = 1e-5
    fd = (double_step(coin, nc, Phi + h * xi) - double_step(coin, nc, Phi - h * xi)) / (2.0 * h)
    assert (fd - apply_L(coin, nc, Phi, xi)).norm() <= 1e-7
    assert (apply_L_inv(coin, nc, Phi, apply_L(coin, nc, Phi, xi)) - xi).norm() <= 1e-12


def test_norm_drift_over_long_run(coin, nc, rng):
    u = random_unit(GRID, rng, width=4.0) * 0.3
    norm0 = u.norm()
    for _ in range(10_000):
        u = double_step(coin, nc, u)
    assert abs(u.norm() - norm0) / norm0 <= 1e-11


def test_step_grid_mismatch(coin, nc):
    with pytest.raises(GridMismatchError):
        step(coin, nc, SpinorField.zeros(LatticeGrid(8)))
