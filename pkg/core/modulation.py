# core/modulation.py
"""
非线性坐标 u = Φ₊[z] + ξ，ξ ∈ H_c[z] = {ξ : ⟨ξ, iDΦ₊[z]w⟩ = 0, ∀w ∈ ℂ}。
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config.settings import MODULATION_CONFIG, WRAP_GUARD_CONFIG
from core.bound_states import (BoundStateFamily, dPhi, eval_Lambda_plus, eval_Phi_plus)
from core.errors import DecompositionError, DomainError, WrapContaminationError
from core.lattice import (SpinorField, boundary_mass, inner, make_rng, proj_pm, random_field,
                          real_inner, weighted_norm)
from core.walk import apply_L, apply_L_inv, apply_U, apply_U_inv, double_step, step

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModulationState:
    z: complex
    eta: SpinorField
    xi: SpinorField
    iterations: int = 0
    residual: float = 0.0


@dataclass
class ModulationTrace:
    rows: List[dict] = field(default_factory=list)
    checkpoints: Dict[int, ModulationState] = field(default_factory=dict)
    failed_at: Optional[int] = None
    failure: Optional[str] = None

    def __len__(self):
        return len(self.rows)

    @property
    def completed(self) -> bool:
        return self.failed_at is None

    def column(self, name: str) -> np.ndarray:
        return np.array([row[name] for row in self.rows])

    def z_series(self) -> np.ndarray:
        return self.column("re_z") + 1j * self.column("im_z")

    def Z_series(self) -> np.ndarray:
        return self.column("re_Z") + 1j * self.column("im_Z")


def _Pc(family: BoundStateFamily, u: SpinorField) -> SpinorField:
    phi_plus = family.phi_plus
    return u - inner(u, phi_plus) * phi_plus


def _tangent(family: BoundStateFamily, z: complex) -> Tuple[SpinorField, SpinorField, SpinorField]:
    """(Φ₊[z], iDΦ₊[z]1, iDΦ₊[z]i)"""
    try:
        Phi_plus = eval_Phi_plus(family, z)
        d1 = 1j * proj_pm(dPhi(family, z, 1.0), "+")
        di = 1j * proj_pm(dPhi(family, z, 1j), "+")
    except DomainError as e:
        raise DecompositionError(f"z = {z:.4e} 超出束缚态族的容许范围: {e}") from e
    return Phi_plus, d1, di


def F_residual(family: BoundStateFamily, z: complex, u: SpinorField) -> np.ndarray:
    """F(z, u) = (⟨u − Φ₊[z], iDΦ₊[z]1⟩, ⟨u − Φ₊[z], iDΦ₊[z]i⟩)"""
    Phi_plus, d1, di = _tangent(family, z)
    diff = u - Phi_plus
    return np.array([real_inner(diff, d1), real_inner(diff, di)])


def jacobian_F(family: BoundStateFamily, z: complex, u: SpinorField, h: float = None) -> np.ndarray:
    """∂F/∂(z_R, z_I) 的中心差分"""
    h = MODULATION_CONFIG["fd_step"] if h is None else h
    cols = []
    for direction in (1.0, 1j):
        plus = F_residual(family, z + h * direction, u)
        minus = F_residual(family, z - h * direction, u)
        cols.append((plus - minus) / (2.0 * h))
    return np.array(cols).T


def decompose(family: BoundStateFamily, u: SpinorField, z_guess: complex, tol: float = None,
              max_iter: int = None) -> ModulationState:
    """Newton 迭代求解 F(z, u) = 0，返回 z、ξ = u − Φ₊[z] 与 η = P_c ξ"""
    tol = MODULATION_CONFIG["newton_tolerance"] if tol is None else tol
    max_iter = MODULATION_CONFIG["newton_max_iter"] if max_iter is None else max_iter
    minus_part = proj_pm(u, "-").norm()
    if minus_part > MODULATION_CONFIG["continuous_tolerance"] * max(u.norm(), 1.0):
        raise DomainError(f"decompose 要求 u = P₊u，P₋u 的范数为 {minus_part:.2e}")

    z = complex(z_guess)
    for iteration in range(max_iter + 1):
        F = F_residual(family, z, u)
        if np.max(np.abs(F)) < tol:
            xi = u - eval_Phi_plus(family, z)
            return ModulationState(z, _Pc(family, xi), xi, iteration, float(np.max(np.abs(F))))
        if iteration == max_iter:
            break
        J = jacobian_F(family, z, u)
        try:
            delta = np.linalg.solve(J, F)
        except np.linalg.LinAlgError as e:
            raise DecompositionError(f"z = {z:.4e} 处 Jacobian 奇异") from e
        z = z - complex(delta[0], delta[1])
    raise DecompositionError(f"Newton 在 {max_iter} 次迭代后未收敛 (|F| = {np.max(np.abs(F)):.2e})")


def pairing_matrix(family: BoundStateFamily, z: complex) -> np.ndarray:
    """[[⟨φ₊, iDΦ₊1⟩, ⟨iφ₊, iDΦ₊1⟩], [⟨φ₊, iDΦ₊i⟩, ⟨iφ₊, iDΦ₊i⟩]]"""
    _, d1, di = _tangent(family, z)
    phi_plus = family.phi_plus
    return np.array([[real_inner(phi_plus, d), real_inner(1j * phi_plus, d)] for d in (d1, di)])


def coeffs_aRaI(family: BoundStateFamily, z: complex) -> Tuple[SpinorField, SpinorField]:
    """R[z] 的修正场 (a_R, a_I)，投影到 P_c l²₊"""
    _, d1, di = _tangent(family, z)
    phi_plus = family.phi_plus
    M = np.array([[real_inner(phi_plus, d), real_inner(1j * phi_plus, d)] for d in (d1, di)])
    if abs(np.linalg.det(M)) < 1e-12:
        raise DomainError(f"z = {z} 处配对矩阵奇异")
    M_inv = np.linalg.inv(M)
    a_R = -(M_inv[0, 0] * d1 + M_inv[0, 1] * di)
    a_I = -(M_inv[1, 0] * d1 + M_inv[1, 1] * di)
    return _Pc(family, a_R), _Pc(family, a_I)


def continuous_residual(family: BoundStateFamily, eta: SpinorField) -> float:
    """η ∈ P_c l²₊ 的偏离：‖P₋η‖ + |(η, φ₊)|"""
    return proj_pm(eta, "-").norm() + abs(inner(eta, family.phi_plus))


def apply_R(family: BoundStateFamily, z: complex, eta: SpinorField,
            coeffs: Tuple[SpinorField, SpinorField] = None) -> SpinorField:
    """R[z]η = η + ⟨η, a_R⟩φ₊ + ⟨η, a_I⟩iφ₊"""
    defect = continuous_residual(family, eta)
    if defect > MODULATION_CONFIG["continuous_tolerance"] * max(eta.norm(), 1.0):
        raise DomainError(f"η 不在 P_c l²₊ 中 (偏离 {defect:.2e})")
    a_R, a_I = coeffs_aRaI(family, z) if coeffs is None else coeffs
    phi_plus = family.phi_plus
    return eta + real_inner(eta, a_R) * phi_plus + (real_inner(eta, a_I) * 1j) * phi_plus


def hc_residual(family: BoundStateFamily, z: complex, xi: SpinorField) -> float:
    """max_k |⟨ξ, iDΦ₊[z]e_k⟩|，e_k ∈ {1, i}"""
    _, d1, di = _tangent(family, z)
    return max(abs(real_inner(xi, d1)), abs(real_inner(xi, di)))


def _apply_L_inv_naive(family: BoundStateFamily, Phi_plus: SpinorField, v: SpinorField) -> SpinorField:
    """把 DN^{-1} 换成 e^{−igγ}（丢掉幂零修正）的错误逆，仅作对照"""
    coin, nc = family.coin, family.nonlinearity

    def rotate_back(w, x):
        m = nc.site_pairing(w.values)
        return SpinorField(x.grid, nc.rotate(x.values, nc.phases(m, sign=-1.0)))

    inner_part = rotate_back(step(coin, nc, Phi_plus), apply_U_inv(coin, v))
    return rotate_back(Phi_plus, apply_U_inv(coin, inner_part))


def check_symplectic(family: BoundStateFamily, z: complex, n_pairs: int = 20, seed: int = 0,
                     inverse: str = "exact") -> float:
    """max |⟨L[z]u, iv⟩ − ⟨u, iL[z]^{-1}v⟩| / (‖u‖‖v‖)，随机对 (u, v)"""
    coin, nc = family.coin, family.nonlinearity
    Phi_plus = eval_Phi_plus(family, z)
    rng = make_rng(seed)
    worst = 0.0
    for _ in range(n_pairs):
        u = random_field(family.grid, rng, width=8.0)
        v = random_field(family.grid, rng, width=8.0)
        left = real_inner(apply_L(coin, nc, Phi_plus, u), 1j * v)
        if inverse == "exact":
            back = apply_L_inv(coin, nc, Phi_plus, v)
        elif inverse == "adjoint":
            back = _apply_L_inv_naive(family, Phi_plus, v)
        else:
            raise DomainError(f"未知的逆算子类型: {inverse}")
        right = real_inner(u, 1j * back)
        worst = max(worst, abs(left - right) / (u.norm() * v.norm()))
    return worst


def check_Hc_invariance(family: BoundStateFamily, z: complex, xi: SpinorField,
                        frozen_phase: bool = False) -> float:
    """e^{−iΛ₊[z]}L[z]ξ 的 H_c[z] 成员残差（按 ‖ξ‖ 归一）；frozen_phase 用 Λ₊[0] 作对照"""
    scale = xi.norm()
    if hc_residual(family, z, xi) > MODULATION_CONFIG["membership_tolerance"] * max(scale, 1.0):
        raise DomainError("ξ 不在 H_c[z] 中")
    Lambda_plus = eval_Lambda_plus(family, 0.0 if frozen_phase else z)
    image = np.exp(-1j * Lambda_plus) * apply_L(family.coin, family.nonlinearity, eval_Phi_plus(family, z), xi)
    return hc_residual(family, z, image) / scale


def _eq_z2_residual(family: BoundStateFamily, z: complex, z_next: complex, Z: complex,
                    xi: SpinorField, L_xi: SpinorField, F1: SpinorField, G: SpinorField) -> float:
    """
    |Z|² = ⟨G, iD₂iZ⟩ + g(t) + ⟨Lξ, i(D₂ − DΦ₊[e^{iΛ₊}z])iZ⟩，D₂ = DΦ₊[z(t+1)]，
    g(t) = ⟨F₁ − Zφ₊, iD₂iZ⟩ + ⟨Zφ₊, i(D₂(iZ) − iZφ₊)⟩
    """
    phi_plus = family.phi_plus
    D2_iZ = proj_pm(dPhi(family, z_next, 1j * Z), "+")
    rotated = np.exp(1j * eval_Lambda_plus(family, z)) * z
    D_rot_iZ = proj_pm(dPhi(family, rotated, 1j * Z), "+")
    g_t = real_inner(F1 - Z * phi_plus, 1j * D2_iZ) + real_inner(Z * phi_plus, 1j * (D2_iZ - (1j * Z) * phi_plus))
    rhs = real_inner(G, 1j * D2_iZ) + g_t + real_inner(L_xi, 1j * (D2_iZ - D_rot_iZ))
    return abs(abs(Z) ** 2 - rhs)


def track(family: BoundStateFamily, u0: SpinorField, T: int, checkpoints: Sequence[int] = (),
          wrap_guard: bool = True) -> ModulationTrace:
    """
    双步演化 u，每步分解（热启动 e^{iΛ₊[z(t)]}z(t)），记录 z(t)、Z(t)、η 的范数、
    F₁/F₂/F₃ 与 |Z|² 恒等式残差。分解失败时返回截断的轨迹。
    """
    coin, nc = family.coin, family.nonlinearity
    checkpoints = set(checkpoints)
    trace = ModulationTrace()
    u = u0
    try:
        state = decompose(family, u, inner(u0, family.phi_plus))
    except DecompositionError as e:
        trace.failed_at, trace.failure = 0, str(e)
        logger.error(f"❌ t=0 分解失败: {e}")
        return trace
    trace.checkpoints[0] = state

    for t in range(T):
        z = state.z
        Lambda_plus = eval_Lambda_plus(family, z)
        Phi_plus = eval_Phi_plus(family, z)
        coeffs = coeffs_aRaI(family, z)
        reconstruction = (u - Phi_plus - apply_R(family, z, state.eta, coeffs)).norm()

        u_next = double_step(coin, nc, u)
        z_guess = np.exp(1j * Lambda_plus) * z
        try:
            state_next = decompose(family, u_next, z_guess)
        except (DecompositionError, DomainError) as e:
            trace.failed_at, trace.failure = t + 1, str(e)
            logger.error(f"❌ t={t + 1} 分解失败，轨迹截断: {e}")
            break
        Z = z_guess - state_next.z

        xi = state.xi
        L_xi = apply_L(coin, nc, Phi_plus, xi)
        F1 = np.exp(1j * Lambda_plus) * Phi_plus - eval_Phi_plus(family, state_next.z)
        G = u_next - double_step(coin, nc, Phi_plus) - L_xi
        F2 = (L_xi - apply_U(coin, apply_U(coin, xi))).norm()

        trace.rows.append({
            "t": t, "re_z": z.real, "im_z": z.imag, "abs_z": abs(z), "Lambda_plus": Lambda_plus,
            "re_Z": Z.real, "im_Z": Z.imag,
            "eta_l2": state.eta.norm(),
            "eta_l2w": weighted_norm(state.eta, 2.0, -2.0),
            "eta_linf": weighted_norm(state.eta, np.inf, 0.0),
            "F1": F1.norm(), "F2": F2, "F3": G.norm(),
            "z2_residual": _eq_z2_residual(family, z, state_next.z, Z, xi, L_xi, F1, G),
            "newton_iters": state_next.iterations,
            "reconstruction": reconstruction,
        })

        u, state = u_next, state_next
        if t + 1 in checkpoints:
            trace.checkpoints[t + 1] = state
            if wrap_guard and boundary_mass(u) > WRAP_GUARD_CONFIG["threshold"]:
                raise WrapContaminationError(
                    f"t={t + 1} 边界质量 {boundary_mass(u):.2e} 超过 {WRAP_GUARD_CONFIG['threshold']:.0e}")
    return trace
