# tests/test_modulation.py
import numpy as np
import pytest

from core.bound_states import eval_Lambda_plus, eval_Phi_plus
from core.errors import DomainError
from core.lattice import make_rng, proj_pm, random_field
from core.modulation import (F_residual, apply_R, check_Hc_invariance, check_symplectic, coeffs_aRaI,
                             continuous_residual, decompose, hc_residual, jacobian_F, pairing_matrix, track)
from core.spectral import Pc

Z0 = 0.05
TOL_DEC = 1e-9
TOL_SYMP = 1e-10


def _continuous_part(family, seed, scale=0.01):
    u = proj_pm(random_field(family.grid, make_rng(seed), width=8.0), "+")
    eta = Pc(family.spectral, u)
    return scale * eta / eta.norm()


def test_pairing_and_jacobian_at_origin(family):
    np.testing.assert_allclose(pairing_matrix(family, 0.0), [[0.0, 1.0], [-1.0, 0.0]], rtol=0, atol=1e-6)
    u = eval_Phi_plus(family, 0.0)
    np.testing.assert_allclose(jacobian_F(family, 0.0, u), [[0.0, -1.0], [1.0, 0.0]], rtol=0, atol=1e-6)


def test_decompose_bound_state_is_exact(family):
    z = Z0 * np.exp(0.4j)
    state = decompose(family, eval_Phi_plus(family, z), z * 1.05)
    assert abs(state.z - z) <= TOL_DEC
    assert state.xi.norm() <= TOL_DEC


def test_decompose_recovers_modulation(family):
    z = Z0 * np.exp(-0.9j)
    eta = _continuous_part(family, seed=11)
    u = eval_Phi_plus(family, z) + apply_R(family, z, eta)
    state = decompose(family, u, z + 0.002)
    assert abs(state.z - z) <= TOL_DEC
    assert (state.eta - eta).norm() <= TOL_DEC
    assert hc_residual(family, state.z, state.xi) <= TOL_DEC
    reconstruction = eval_Phi_plus(family, state.z) + apply_R(family, state.z, state.eta)
    assert (reconstruction - u).norm() <= TOL_DEC
    assert np.max(np.abs(F_residual(family, state.z, u))) <= 1e-10


@pytest.mark.parametrize("theta", [0.7, 2.5, -1.9])
def test_decompose_is_gauge_equivariant(family, theta):
    z = Z0 * np.exp(0.2j)
    u = eval_Phi_plus(family, z) + _continuous_part(family, seed=5)
    state = decompose(family, u, z)
    phase = np.exp(1j * theta)
    rotated = decompose(family, phase * u, phase * z)
    assert abs(rotated.z - phase * state.z) <= TOL_DEC
    assert (rotated.xi - phase * state.xi).norm() <= TOL_DEC
    assert (rotated.eta - phase * state.eta).norm() <= TOL_DEC


def test_decompose_rejects_minus_component(family):
    u = eval_Phi_plus(family, Z0) + 0.1 * proj_pm(random_field(family.grid, make_rng(2)), "-")
    with pytest.raises(DomainError):
        decompose(family, u, Z0)


def test_R_maps_into_Hc(family):
    z = Z0 * np.exp(1.3j)
    eta = _continuous_part(family, seed=5, scale=1.0)
    assert continuous_residual(family, eta) <= 1e-12
    xi = apply_R(family, z, eta, coeffs_aRaI(family, z))
    assert hc_residual(family, z, xi) <= 1e-12
    with pytest.raises(DomainError):
        apply_R(family, z, eta + 0.1 * family.phi_plus)


def test_symplectic_identity(family, family_p1):
    assert check_symplectic(family, Z0) <= TOL_SYMP
    z1 = np.sqrt(family_p1.r_max) / 2.0
    exact = check_symplectic(family_p1, z1)
    naive = check_symplectic(family_p1, z1, inverse="adjoint")
    assert exact <= TOL_SYMP
    assert naive > 1e3 * exact
    with pytest.raises(DomainError):
        check_symplectic(family, Z0, inverse="transpose")


def test_Hc_invariance(family):
    z = Z0 * np.exp(0.2j)
    xi = apply_R(family, z, _continuous_part(family, seed=8, scale=1.0))
    assert check_Hc_invariance(family, z, xi) <= 1e-7
    with pytest.raises(DomainError):
        check_Hc_invariance(family, z, xi + family.phi_plus)


def test_track_exact_orbit(family):
    z0 = Z0 * np.exp(0.3j)
    trace = track(family, eval_Phi_plus(family, z0), T=20, checkpoints=[10, 20])
    assert trace.completed
    assert len(trace) == 20
    assert np.max(np.abs(trace.Z_series())) <= 1e-8
    assert np.max(trace.column("eta_l2")) <= 1e-8
    np.testing.assert_allclose(trace.column("abs_z"), abs(z0), rtol=0, atol=1e-8)
    assert set(trace.checkpoints) == {0, 10, 20}

    expected = z0 * np.exp(1j * eval_Lambda_plus(family, z0) * 20)
    assert abs(trace.checkpoints[20].z - expected) <= 1e-7


def test_track_perturbed_orbit_stays_consistent(family):
    z0 = Z0
    u0 = eval_Phi_plus(family, z0) + apply_R(family, z0, _continuous_part(family, seed=21, scale=1e-3))
    trace = track(family, u0, T=10)
    assert trace.completed
    assert np.max(trace.column("reconstruction")) <= 1e-9
    assert np.max(trace.column("z2_residual")) <= 1e-8
    norms = trace.column("eta_l2")
    assert np.all(norms <= 2e-3)
