# tests/test_bound_states.py
import numpy as np
import pytest

from core.bound_states import (bound_state_residual, correction_detail, dPhi_plus, double_step_residual,
                               eval_Lambda, eval_Lambda_plus, eval_Phi, eval_Phi_plus, fixed_point_residual,
                               newton_bound_state, scaling_sweep, solve_correction)
from core.errors import DomainError
from core.lattice import LatticeGrid, inner, proj_pm
from core.spectral import localized_spectrum
from core.walk import build_coin

TOL = 1e-9
TOL_FP = 1e-10
Z0 = 0.05


def test_family_metadata(family):
    meta = family.metadata
    assert family.r_max >= Z0 ** 2
    assert meta["max_contraction_ratio"] <= 0.5
    assert meta["max_lambda_imag"] <= 1e-12
    assert meta["interp_error"] <= 1e-9
    assert meta["max_fixed_point_residual"] <= TOL_FP


def test_phi_normalization(family):
    assert family.phi_plus.norm() == pytest.approx(1.0, abs=1e-12)
    assert family.phi.norm() == pytest.approx(np.sqrt(2.0), abs=1e-12)


def test_correction_is_orthogonal_to_phi(family):
    for r in family.nodes[1:]:
        assert abs(inner(family.psi(r), family.phi)) <= TOL_FP


def test_fixed_point_residual_at_nodes(family):
    for r in family.nodes[::8]:
        assert fixed_point_residual(family, r, family.psi(r)) <= TOL_FP


@pytest.mark.parametrize("s", [0.0, 1.0, 2.0])
def test_weighted_stopping_rule(family, s):
    result = correction_detail(family, Z0 ** 2, s=s)
    assert result.residual <= TOL
    psi, mu = solve_correction(family, Z0 ** 2, s=s)
    assert (psi - correction_detail(family, Z0 ** 2).psi).norm() <= 1e-10


def test_bound_state_residual(family):
    assert bound_state_residual(family, Z0) <= TOL
    assert bound_state_residual(family, Z0 * np.exp(0.7j)) <= TOL
    assert double_step_residual(family, Z0) <= TOL


def test_gauge_covariance_of_family(family):
    theta = 1.1
    rotated = eval_Phi(family, Z0 * np.exp(1j * theta))
    assert (rotated - np.exp(1j * theta) * eval_Phi(family, Z0)).norm() <= 1e-13
    assert eval_Lambda(family, Z0 * np.exp(1j * theta)) == pytest.approx(eval_Lambda(family, Z0), abs=1e-12)


def test_zero_is_linear_eigenpair(family):
    assert eval_Phi(family, 0.0).norm() == 0.0
    assert eval_Lambda(family, 0.0) == pytest.approx(family.lam, abs=1e-14)
    assert eval_Lambda_plus(family, Z0) == pytest.approx(2.0 * eval_Lambda(family, Z0))
    assert proj_pm(eval_Phi_plus(family, Z0), "-").norm() <= 1e-15


def test_outside_family_raises(family):
    with pytest.raises(DomainError):
        eval_Phi(family, 2.0 * np.sqrt(family.r_max))


def test_newton_oracle_agrees(family):
    Phi_newton, Lambda_newton = newton_bound_state(family.coin, family.nonlinearity, family.lam, family.phi, Z0)
    assert (Phi_newton - eval_Phi(family, Z0)).norm() <= TOL
    assert Lambda_newton == pytest.approx(eval_Lambda(family, Z0), abs=TOL)


@pytest.mark.parametrize("w", [1.0, 1j])
def test_derivative_matches_finite_differences(family, w):
    h = 1e-5
    fd = (eval_Phi_plus(family, Z0 + h * w) - eval_Phi_plus(family, Z0 - h * w)) / (2.0 * h)
    assert (fd - dPhi_plus(family, Z0, w)).norm() <= 1e-7


def test_derivative_at_zero_is_phi_plus(family):
    assert (dPhi_plus(family, 0.0, 1.0) - family.phi_plus).norm() <= 1e-14
    assert (dPhi_plus(family, 0.0, 1j) - 1j * family.phi_plus).norm() <= 1e-14


def test_cubic_scaling_for_linear_power(family_p1):
    z1 = np.sqrt(family_p1.r_max) / 4.0
    rows = scaling_sweep(family_p1, [z1, z1 / 2.0])
    ratio = rows[0]["phi_deviation"] / rows[1]["phi_deviation"]
    assert ratio == pytest.approx(8.0, rel=0.15)
    shift_ratio = rows[0]["lambda_shift"] / rows[1]["lambda_shift"]
    assert shift_ratio == pytest.approx(4.0, rel=0.15)
    assert all(row["residual"] <= TOL for row in rows)


def test_embedded_family_matches_core(family):
    big = localized_spectrum(build_coin("kls-origin", LatticeGrid(128)), core_half_width=64)
    embedded = family.embedded(big)
    assert embedded.grid.half_width == 128
    Phi_big = eval_Phi(embedded, Z0)
    assert (Phi_big.restrict(family.grid) - eval_Phi(family, Z0)).norm() <= 1e-12
    assert bound_state_residual(embedded, Z0) <= TOL
    with pytest.raises(DomainError):
        embedded.embedded(localized_spectrum(build_coin("kls-origin", LatticeGrid(32)), core_half_width=32))
