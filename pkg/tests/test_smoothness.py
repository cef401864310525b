# tests/test_smoothness.py
import numpy as np
import pytest

from core.errors import DomainError
from core.lattice import LatticeGrid, make_rng
from core.smoothness import (SmoothnessReport, UnitarySpectrum, fourier_identities_check, horizon, kato_sufficient,
                             kato_trend, lambda_grid, normalization_residual, positivity_floor, qty_interval,
                             qty_resolvent, qty_sup_resolvent, qty_time, random_unitary,
                             resolvent_identity_residual, smoothness_report, spectral_projection, stone_projection,
                             stone_weight, stone_weight_closed_form, interval_grid)
from core.spectral import full_spectrum
from core.walk import build_coin

TOL_PLANCHEREL = 1e-9
TOL_IDENTITY = 1e-10
DIM = 8


@pytest.fixture(scope="module")
def spec():
    return UnitarySpectrum.from_matrix(random_unitary(DIM, seed=3))


@pytest.fixture(scope="module")
def weight_and_state():
    rng = make_rng(17)
    A = rng.uniform(0.2, 1.0, DIM)
    phi = rng.standard_normal(DIM) + 1j * rng.standard_normal(DIM)
    return A, phi / np.linalg.norm(phi)


def test_random_unitary_is_unitary():
    U = random_unitary(12, seed=1)
    np.testing.assert_allclose(U.conj().T @ U, np.eye(12), rtol=0, atol=1e-13)
    np.testing.assert_array_equal(U, random_unitary(12, seed=1))


def test_non_unitary_rejected():
    with pytest.raises(DomainError):
        UnitarySpectrum.from_matrix(2.0 * np.eye(3))
    with pytest.raises(DomainError):
        UnitarySpectrum.from_matrix(np.ones((2, 3)))


def test_horizon_tail_bound():
    for eps in (0.1, 0.01):
        T = horizon(eps)
        assert np.exp(-eps * T) / -np.expm1(-eps) <= 1e-10
        assert np.exp(-eps * (T - 2)) / -np.expm1(-eps) > 1e-10
    with pytest.raises(DomainError):
        horizon(0.0)


@pytest.mark.parametrize("eps", [0.1, 0.01])
def test_plancherel(spec, weight_and_state, eps):
    A, phi = weight_and_state
    time_side = qty_time(A, spec, phi, eps)
    resolvent_side = qty_resolvent(A, spec, phi, eps)
    assert abs(time_side - resolvent_side) / time_side <= TOL_PLANCHEREL


def test_short_horizon_rejected(spec, weight_and_state):
    A, phi = weight_and_state
    with pytest.raises(DomainError):
        qty_time(A, spec, phi, 0.1, T=10)


@pytest.mark.parametrize("eps", [1.0, 0.1, 0.01])
def test_resolvent_identity_and_positivity(spec, eps):
    for lam in (0.0, 1.3, 4.4):
        assert resolvent_identity_residual(spec, lam, eps) <= TOL_IDENTITY
    assert positivity_floor(spec, eps, [0.0, 1.3, 4.4]) >= -TOL_IDENTITY


def test_normalization(spec, weight_and_state):
    _, phi = weight_and_state
    assert normalization_residual(spec, phi, 0.1) <= 1e-10
    assert normalization_residual(spec, phi, 0.01) <= 1e-10


def test_fourier_identities(spec, weight_and_state):
    A, phi = weight_and_state
    report = fourier_identities_check(A, spec, phi, 0.05, n_lambda=16)
    assert set(report) == {"forward", "backward", "two_sided"}
    assert max(report.values()) <= 1e-9


def test_sup_bounded_by_kato_quantity(spec, weight_and_state):
    A, _ = weight_and_state
    grid = lambda_grid(16)
    sup3 = qty_sup_resolvent(A, spec, [0.1], grid)
    kato = kato_sufficient(A, spec, [lam + s * 0.1j for lam in grid for s in (1.0, -1.0)])
    assert sup3 <= 2.0 * kato / (2.0 * np.pi) + 1e-12
    with pytest.raises(DomainError):
        kato_sufficient(A, spec, [1.0 + 0.0j])


def test_sup_is_thread_count_independent(spec, weight_and_state):
    A, _ = weight_and_state
    grid = lambda_grid(16)
    serial = qty_sup_resolvent(A, spec, [0.1, 0.03], grid, workers=1)
    threaded = qty_sup_resolvent(A, spec, [0.1, 0.03], grid, workers=4)
    assert serial == threaded


def test_interval_quantity_skips_narrow_intervals(spec):
    A = np.ones(DIM)
    assert qty_interval(A, spec, [(0.0, 0.01)], width_floor=0.05) == 0.0
    full = qty_interval(A, spec, [(0.0, 2.0 * np.pi)], width_floor=0.05)
    assert full == pytest.approx(1.0 / (2.0 * np.pi))
    assert len(interval_grid(8, [0.1, 0.2])) == 16


@pytest.mark.parametrize("theta", [0.5, 2.0, 5.5])
def test_stone_weight_closed_form(theta):
    for eps in (0.1, 0.01):
        assert stone_weight(theta, 1.0, 3.0, eps) == pytest.approx(stone_weight_closed_form(theta, 1.0, 3.0, eps),
                                                                    abs=1e-10)


def _fixed_instance():
    angles = np.array([0.3, 1.9, 3.5, 5.0])
    V = random_unitary(4, seed=9)
    return UnitarySpectrum.from_matrix((V * np.exp(1j * angles)) @ V.conj().T), angles


def test_stone_projection_extrapolates():
    spec4, angles = _fixed_instance()
    result = stone_projection(spec4, (angles[0] + angles[1]) / 2.0, (angles[2] + angles[3]) / 2.0)
    assert result.deviation <= 1e-6
    direct = spectral_projection(spec4, (angles[0] + angles[1]) / 2.0, (angles[2] + angles[3]) / 2.0)
    np.testing.assert_allclose(direct @ direct, direct, rtol=0, atol=1e-12)
    assert np.trace(direct).real == pytest.approx(2.0)


def test_stone_endpoint_gets_half_weight():
    spec4, angles = _fixed_instance()
    a, b = angles[1], (angles[2] + angles[3]) / 2.0
    result = stone_projection(spec4, a, b)
    idx = int(np.argmin(np.abs(spec4.angles - angles[1])))
    assert idx in result.endpoint_indices
    assert result.extrapolated_weights[idx] == pytest.approx(0.5, abs=0.02)
    with pytest.raises(DomainError):
        stone_projection(spec4, a, b, half_weight=False)


def test_smoothness_report(spec, weight_and_state):
    A, phi = weight_and_state
    report = smoothness_report(A, spec, phi, 0.1, grid_size=16)
    assert report.plancherel <= TOL_PLANCHEREL
    assert report.resolvent_identity <= TOL_IDENTITY
    assert report.normalization <= 1e-10
    assert report.positivity >= -TOL_IDENTITY
    row = report.to_row()
    assert row["horizon"] == horizon(0.1)
    assert row["quad_size"] == 4 * (horizon(0.1) + 1)


def test_report_rejects_negative_quantity():
    with pytest.raises(DomainError):
        SmoothnessReport(0.1, 10, 44, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


def test_kato_trend_on_walk():
    sd = full_spectrum(build_coin("kls-origin", LatticeGrid(16)))
    trend = kato_trend(sd, s=2.0, eps_list=[0.1, 0.03], grid_size=8)
    assert trend["eps"] == [0.1, 0.03]
    assert len(trend["sup"]) == 2
    assert len(trend["ratio"]) == 1
    assert all(np.isfinite(trend["sup"]))
