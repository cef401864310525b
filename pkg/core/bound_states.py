# core/bound_states.py
"""
非线性束缚态族 Φ[z] = z(φ + |z|²ψ[|z|²])，Λ[z] = λ + |z|²μ[|z|²]。

ψ[r] 是 ψ = −(U − e^{iΛ})^{-1} P̃_c U K(r, φ + rψ) 的不动点，其中
K(r, v) = r^{-1}(e^{i g(r⟨v,γv⟩)γ} − 1)v，e^{ir μ} = 1 + r (K, φ)/‖φ‖²。
φ 归一化为 ‖P₊φ‖ = 1。
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import least_squares

from config.settings import BOUND_STATE_CONFIG
from core.errors import ContractionError, ConvergenceError, DomainError
from core.lattice import LatticeGrid, SpinorField, inner, proj_pm, weighted_norm
from core.spectral import SpectralData, discrete_eigenpair, resolvent_solve
from core.walk import CoinField, NonlinearCoin, apply_DN, apply_U, double_step, step

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CorrectionResult:
    r: float
    psi: SpinorField
    mu: float
    iterations: int
    max_ratio: float
    residual: float
    lambda_imag: float


class _CorrectionSolver:
    """固定 (U, φ, λ, γ, g) 下的不动点迭代"""

    def __init__(self, spectral: SpectralData, nonlinearity: NonlinearCoin):
        lam, phi_unit = discrete_eigenpair(spectral, "plus")
        self.spectral = spectral
        self.coin = spectral.coin
        self.nonlinearity = nonlinearity
        self.lam = lam
        self.phi = phi_unit * np.sqrt(2.0)
        self.phi_norm2 = self.phi.norm() ** 2

    def kernel(self, r: float, v: SpinorField) -> SpinorField:
        nc = self.nonlinearity
        m = nc.site_pairing(v.values)
        return SpinorField(v.grid, nc.rotate(v.values, nc.scaled_kernel(r, m)))

    def apply_map(self, r: float, psi: SpinorField) -> Tuple[SpinorField, float, float]:
        """𝒩(r, ψ)，同时返回 μ 与 Im Λ = −ln|1 + rq|"""
        kern = self.kernel(r, self.phi + r * psi)
        q = inner(kern, self.phi) / self.phi_norm2
        if r > 0.0:
            one_plus = 1.0 + r * q
            mu = float(np.angle(one_plus) / r)
            lambda_imag = float(-np.log(abs(one_plus)))
        else:
            mu, lambda_imag = float(q.imag), 0.0
        rhs = -apply_U(self.coin, kern)
        new = resolvent_solve(self.spectral, self.lam + r * mu, rhs, mode="off_phi")
        return new, mu, lambda_imag

    def solve(self, r: float, s: float = 0.0, tol: float = None, max_iter: int = None,
              margin: float = None) -> CorrectionResult:
        tol = BOUND_STATE_CONFIG["tolerance"] if tol is None else tol
        max_iter = BOUND_STATE_CONFIG["max_iter"] if max_iter is None else max_iter
        margin = BOUND_STATE_CONFIG["contraction_margin"] if margin is None else margin
        if r < 0:
            raise DomainError(f"r = |z|² 必须非负，收到 {r}")

        psi = SpinorField.zeros(self.phi.grid)
        if self.nonlinearity.is_linear:
            return CorrectionResult(r, psi, 0.0, 0, 0.0, 0.0, 0.0)

        prev_diff, ratios = None, []
        for iteration in range(1, max_iter + 1):
            new, mu, _ = self.apply_map(r, psi)
            diff = weighted_norm(new - psi, 2.0, s)
            if prev_diff is not None and prev_diff > 100.0 * tol:
                ratios.append(diff / prev_diff)
            psi, prev_diff = new, diff
            if ratios and ratios[-1] >= 1.0:
                raise ContractionError(f"r = {r:.3e} 处差分比 {ratios[-1]:.3f} ≥ 1，r 过大")
            if diff < tol:
                break
        else:
            raise ConvergenceError(f"r = {r:.3e} 处 {max_iter} 次迭代未收敛 (差分 {prev_diff:.2e})")

        max_ratio = max(ratios) if ratios else 0.0
        if max_ratio > margin:
            raise ContractionError(f"r = {r:.3e} 处压缩比 {max_ratio:.3f} > {margin}")
        image, mu, lambda_imag = self.apply_map(r, psi)
        residual = weighted_norm(psi - image, 2.0, s)
        return CorrectionResult(r, psi, mu, iteration, max_ratio, residual, lambda_imag)


def _chebyshev_nodes(r_max: float, n: int) -> np.ndarray:
    """[0, r_max] 上含端点的 Chebyshev 节点"""
    j = np.arange(n)
    return r_max * (1.0 - np.cos(np.pi * j / (n - 1))) / 2.0


def _split(values: np.ndarray) -> np.ndarray:
    return np.concatenate([values.real, values.imag], axis=-1)


def _merge(values: np.ndarray) -> np.ndarray:
    half = values.shape[-1] // 2
    return values[..., :half] + 1j * values[..., half:]


@dataclass(frozen=True, eq=False)
class BoundStateFamily:
    spectral: SpectralData
    nonlinearity: NonlinearCoin
    r_max: float
    nodes: np.ndarray
    psi_nodes: np.ndarray
    mu_nodes: np.ndarray
    metadata: Dict[str, float] = field(default_factory=dict)
    # 嵌入后 ψ 节点仍存于求解时的核心格点，求值时零填充
    core_grid: Optional[LatticeGrid] = None

    def __post_init__(self):
        n_nodes = len(self.nodes)
        flat = self.psi_nodes.reshape(n_nodes, -1)
        object.__setattr__(self, "_psi_spline", CubicSpline(self.nodes, _split(flat), axis=0))
        object.__setattr__(self, "_mu_spline", CubicSpline(self.nodes, self.mu_nodes))
        object.__setattr__(self, "_solver", _CorrectionSolver(self.spectral, self.nonlinearity))

    @property
    def coin(self) -> CoinField:
        return self.spectral.coin

    @property
    def grid(self):
        return self.spectral.grid

    @property
    def lam(self) -> float:
        return self._solver.lam

    @property
    def phi(self) -> SpinorField:
        """‖P₊φ‖ = 1 归一化的本征函数"""
        return self._solver.phi

    @property
    def phi_plus(self) -> SpinorField:
        return proj_pm(self.phi, "+")

    def _check_r(self, r: float):
        if r > self.r_max * (1.0 + 1e-12):
            raise DomainError(f"|z|² = {r:.4e} 超过 r_max = {self.r_max:.4e}")

    def _field(self, values: np.ndarray) -> SpinorField:
        source = self.core_grid or self.grid
        field_ = SpinorField(source, values.reshape(source.n_sites, 2))
        return field_ if source == self.grid else field_.embed(self.grid)

    def psi(self, r: float) -> SpinorField:
        self._check_r(r)
        return self._field(_merge(self._psi_spline(r)))

    def mu(self, r: float) -> float:
        self._check_r(r)
        return float(self._mu_spline(r))

    def psi_prime(self, r: float) -> SpinorField:
        """ψ′[r]：插值曲线上的中心差分 + Richardson 外推"""
        self._check_r(r)
        h = BOUND_STATE_CONFIG["derivative_step"] * self.r_max

        def central(step):
            forward = _merge(self._psi_spline(r + step))
            backward = _merge(self._psi_spline(r - step))
            return (forward - backward) / (2.0 * step)

        return self._field((4.0 * central(h / 2.0) - central(h)) / 3.0)

    def embedded(self, spectral: SpectralData) -> "BoundStateFamily":
        """把核心格点上求得的族放到 spectral 所在的大格点（ψ 在核心外为零）"""
        core = self.core_grid or self.grid
        if spectral.grid.half_width < core.half_width:
            raise DomainError(f"目标格点 L={spectral.grid.half_width} 小于核心格点 L={core.half_width}")
        return replace(self, spectral=spectral, core_grid=core,
                       metadata={**self.metadata, "embedded_from": core.half_width})


def _find_r_max(solver: _CorrectionSolver, seed: float, max_halvings: int) -> float:
    r = seed
    for _ in range(max_halvings + 1):
        try:
            solver.solve(r)
            return r
        except (ContractionError, ConvergenceError) as e:
            logger.info(f"🔄 r = {r:.3e} 不满足压缩条件 ({e})，折半")
            r /= 2.0
    raise ContractionError(f"折半 {max_halvings} 次后仍未找到满足压缩条件的 r_max")


def build_family(spectral: SpectralData, nonlinearity: NonlinearCoin, r_max: float = None,
                 n_nodes: int = None, monitor: bool = True) -> BoundStateFamily:
    """
    构造束缚态族：自适应确定 r_max，在 Chebyshev 节点上求解不动点，
    并在相邻节点中点直接重算以监控插值误差。
    """
    n_nodes = n_nodes or BOUND_STATE_CONFIG["nodes"]
    solver = _CorrectionSolver(spectral, nonlinearity)
    if r_max is None:
        r_max = _find_r_max(solver, BOUND_STATE_CONFIG["r_max_seed"], BOUND_STATE_CONFIG["max_halvings"])
    logger.info(f"🧩 构造束缚态族: λ={solver.lam:.10f}, g(s)={nonlinearity.c}·s^{nonlinearity.p}, "
                f"r_max={r_max:.4e}, 节点 {n_nodes} 个")

    nodes = _chebyshev_nodes(r_max, n_nodes)
    results = [solver.solve(r) for r in nodes]
    family = BoundStateFamily(
        spectral, nonlinearity, r_max, nodes,
        np.array([res.psi.values for res in results]),
        np.array([res.mu for res in results]),
        metadata={
            "r_max": r_max,
            "max_contraction_ratio": max(res.max_ratio for res in results),
            "max_fixed_point_residual": max(res.residual for res in results),
            "max_lambda_imag": max(abs(res.lambda_imag) for res in results),
            "max_iterations": max(res.iterations for res in results),
        },
    )

    if monitor and not nonlinearity.is_linear:
        midpoints = (nodes[1:] + nodes[:-1]) / 2.0
        errors = []
        for r in midpoints:
            direct = solver.solve(r)
            errors.append(max((family.psi(r) - direct.psi).norm(), abs(family.mu(r) - direct.mu) * r))
        interp_error = float(max(errors))
        family.metadata["interp_error"] = interp_error
        if interp_error > BOUND_STATE_CONFIG["interp_tolerance"]:
            logger.warning(f"⚠️ 插值误差 {interp_error:.2e} 超过 {BOUND_STATE_CONFIG['interp_tolerance']:.0e}")
    logger.info(f"✅ 束缚态族就绪: {family.metadata}")
    return family


def solve_correction(family: BoundStateFamily, r: float, s: float = 0.0) -> Tuple[SpinorField, float]:
    """直接求解 r 处的 (ψ[r], μ[r])，s 为停止判据使用的 l^{2,s} 权重"""
    family._check_r(r)
    result = family._solver.solve(r, s=s)
    return result.psi, result.mu


def correction_detail(family: BoundStateFamily, r: float, s: float = 0.0) -> CorrectionResult:
    family._check_r(r)
    return family._solver.solve(r, s=s)


def fixed_point_residual(family: BoundStateFamily, r: float, psi: SpinorField, s: float = 0.0) -> float:
    """‖ψ − 𝒩(r, ψ)‖_{l^{2,s}}"""
    image, _, _ = family._solver.apply_map(r, psi)
    return weighted_norm(psi - image, 2.0, s)


def eval_Phi(family: BoundStateFamily, z: complex) -> SpinorField:
    r = abs(z) ** 2
    return z * (family.phi + r * family.psi(r))


def eval_Lambda(family: BoundStateFamily, z: complex) -> float:
    r = abs(z) ** 2
    return family.lam + r * family.mu(r)


def eval_Phi_plus(family: BoundStateFamily, z: complex) -> SpinorField:
    return proj_pm(eval_Phi(family, z), "+")


def eval_Lambda_plus(family: BoundStateFamily, z: complex) -> float:
    return 2.0 * eval_Lambda(family, z)


def dPhi(family: BoundStateFamily, z: complex, w: complex) -> SpinorField:
    """DΦ[z]w = w(φ + rψ) + 2Re(z̄w)·z·(ψ + rψ′)，对 w 实线性"""
    r = abs(z) ** 2
    psi = family.psi(r)
    base = w * (family.phi + r * psi)
    if z == 0:
        return base
    return base + (2.0 * (np.conj(z) * w).real * z) * (psi + r * family.psi_prime(r))


def dPhi_plus(family: BoundStateFamily, z: complex, w: complex) -> SpinorField:
    return proj_pm(dPhi(family, z, w), "+")


def bound_state_residual(family: BoundStateFamily, z: complex) -> float:
    """‖UN(Φ[z]) − e^{iΛ[z]}Φ[z]‖"""
    Phi = eval_Phi(family, z)
    return (step(family.coin, family.nonlinearity, Phi) - np.exp(1j * eval_Lambda(family, z)) * Phi).norm()


def double_step_residual(family: BoundStateFamily, z: complex) -> float:
    """‖𝒰(Φ₊[z]) − e^{iΛ₊[z]}Φ₊[z]‖"""
    Phi_plus = eval_Phi_plus(family, z)
    image = double_step(family.coin, family.nonlinearity, Phi_plus)
    return (image - np.exp(1j * eval_Lambda_plus(family, z)) * Phi_plus).norm()


def scaling_sweep(family: BoundStateFamily, zs) -> List[dict]:
    """束缚态族的标度表：‖Φ[z] − zφ‖、|Λ[z] − λ|、残差与导数接近度"""
    rows = []
    for z in zs:
        z = complex(z)
        Phi = eval_Phi(family, z)
        deviation = (Phi - z * family.phi).norm()
        derivative = (dPhi_plus(family, z, 1.0) - family.phi_plus).norm()
        rows.append({
            "re_z": z.real, "im_z": z.imag, "abs_z": abs(z),
            "lambda": eval_Lambda(family, z),
            "lambda_shift": abs(eval_Lambda(family, z) - family.lam),
            "phi_deviation": deviation,
            "derivative_deviation": derivative,
            "residual": bound_state_residual(family, z),
        })
    return rows


def newton_bound_state(coin: CoinField, nonlinearity: NonlinearCoin, lam: float, phi: SpinorField,
                       z: float) -> Tuple[SpinorField, float]:
    """
    独立的实化 Newton 校验：求解 UN(Φ) = e^{iΛ}Φ，规范条件 (Φ, φ)/‖φ‖² = z（z 实数）。
    """
    grid = phi.grid
    dim = grid.dim
    phi_norm2 = phi.norm() ** 2

    def unpack(x):
        return SpinorField.from_flat(grid, x[:dim] + 1j * x[dim:2 * dim]), x[-1]

    def residual(x):
        Phi, Lam = unpack(x)
        eq = step(coin, nonlinearity, Phi) - np.exp(1j * Lam) * Phi
        gauge = inner(Phi, phi) / phi_norm2 - z
        return np.concatenate([eq.flat().real, eq.flat().imag, [gauge.real, gauge.imag]])

    def jacobian(x):
        Phi, Lam = unpack(x)
        columns = []
        for k in range(2 * dim):
            direction = np.zeros(dim, dtype=np.complex128)
            direction[k % dim] = 1.0 if k < dim else 1j
            e = SpinorField.from_flat(grid, direction)
            col = apply_U(coin, apply_DN(nonlinearity, Phi, e)) - np.exp(1j * Lam) * e
            gauge = inner(e, phi) / phi_norm2
            columns.append(np.concatenate([col.flat().real, col.flat().imag, [gauge.real, gauge.imag]]))
        col = -1j * np.exp(1j * Lam) * Phi
        columns.append(np.concatenate([col.flat().real, col.flat().imag, [0.0, 0.0]]))
        return np.array(columns).T

    x0 = np.concatenate([(z * phi).flat().real, (z * phi).flat().imag, [lam]])
    solution = least_squares(residual, x0, jac=jacobian, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
    Phi, Lam = unpack(solution.x)
    logger.debug(f"Newton 校验: 代价 {solution.cost:.2e}, 评估 {solution.nfev} 次")
    return Phi, float(Lam)
