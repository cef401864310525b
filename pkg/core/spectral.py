# core/spectral.py
"""
截断格点上 U 的离散谱与本征函数、P_c 投影、预解式求解、U∞ 的色散带，
以及转移矩阵构造的衰减解。
"""
import logging
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.signal import lfilter
from scipy.stats import linregress

from config.settings import LATTICE_CONFIG
from core.MyThreadPool import dense_semaphore
from core.errors import (ConvergenceError, DenseCapError, DomainError, NearSingularError,
                         NoDiscreteSpectrumError)
from core.lattice import LatticeGrid, SpinorField, inner, proj_pm, zigzag
from core.walk import CoinField, apply_U, dense_U, sparse_U

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True, eq=False)
class SpectralData:
    coin: CoinField
    eigen_angles: np.ndarray
    eigenvectors: Optional[np.ndarray]
    discrete_indices: Tuple[int, ...]
    localization_mass: np.ndarray
    gap_margin: np.ndarray
    band_cos: float
    pairs: Dict[str, Tuple[float, SpinorField]]
    method: str = "dense"

    @property
    def grid(self) -> LatticeGrid:
        return self.coin.grid

    @property
    def lam(self) -> float:
        return self.pairs["plus"][0]

    @property
    def phi(self) -> SpinorField:
        return self.pairs["plus"][1]

    @property
    def phi_plus(self) -> SpinorField:
        """P₊φ，归一化使 ‖φ₊‖ = 1"""
        projected = proj_pm(self.phi, "+")
        return projected / projected.norm()

    @property
    def has_discrete(self) -> bool:
        return "plus" in self.pairs

    @property
    def band_edges(self) -> Tuple[float, ...]:
        """本质谱带 {|cos λ| ≤ |β∞|} 的四个端点"""
        edge = float(np.arccos(self.band_cos))
        return edge, np.pi - edge, np.pi + edge, TWO_PI - edge

    def plus_index(self) -> Optional[int]:
        if not self.has_discrete:
            return None
        distance = np.abs(np.angle(np.exp(1j * (self.eigen_angles - self.lam))))
        return int(np.argmin(distance))

    def rows(self):
        """spectrum CSV 行"""
        discrete = set(self.discrete_indices)
        return [
            {"index": j, "angle": float(a), "is_discrete": int(j in discrete),
             "localization_mass": float(m), "gap_margin": float(g)}
            for j, (a, m, g) in enumerate(zip(self.eigen_angles, self.localization_mass, self.gap_margin))
        ]


def phase_fix(vector: np.ndarray) -> np.ndarray:
    """最大模分量取为正实数"""
    k = int(np.argmax(np.abs(vector)))
    return vector * (np.conj(vector[k]) / abs(vector[k]))


def unitary_eig(matrix: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    正规矩阵的复 Schur 分解：T 近似对角，Z 的列即正交本征基。
    返回按 [0, 2π) 排序的本征相位与对应本征向量。
    """
    try:
        with dense_semaphore:
            T, Z = la.schur(matrix, output="complex")
    except (la.LinAlgError, ValueError) as e:
        raise ConvergenceError(f"稠密本征分解失败: {e}") from e
    off_diag = np.max(np.abs(np.triu(T, 1))) if T.shape[0] > 1 else 0.0
    if off_diag > 1e-8:
        logger.warning(f"⚠️ Schur 因子偏离对角 {off_diag:.2e}，矩阵可能不是正规矩阵")
    angles = np.mod(np.angle(np.diag(T)), TWO_PI)
    order = np.argsort(angles, kind="stable")
    return angles[order], Z[:, order]


def _site_mass(vectors: np.ndarray, grid: LatticeGrid) -> np.ndarray:
    """各本征向量在 |x| ≤ L/2 内的质量"""
    weights = np.abs(vectors) ** 2
    per_site = weights.reshape(grid.n_sites, 2, -1).sum(axis=1)
    inside = np.abs(grid.coords) <= grid.half_width / 2
    return per_site[inside].sum(axis=0)


def _pair(coin: CoinField, angle: float, vector: np.ndarray) -> Tuple[float, SpinorField]:
    vector = phase_fix(vector / np.linalg.norm(vector))
    return float(angle), SpinorField.from_flat(coin.grid, vector)


def full_spectrum(coin: CoinField) -> SpectralData:
    """组装 4L×4L 的 U 并完整分解，然后按带隙条件与局域化判据分类"""
    grid = coin.grid
    if grid.dim > LATTICE_CONFIG["dense_cap"]:
        raise DenseCapError(f"4L = {grid.dim} 超过稠密上限 {LATTICE_CONFIG['dense_cap']}")

    logger.info(f"🔍 稠密分解 U: 预设={coin.preset}, L={grid.half_width}, 维数={grid.dim}")
    angles, vectors = unitary_eig(dense_U(coin))
    band_cos = float(np.sqrt(1.0 - abs(coin.alpha_inf) ** 2))
    masses = _site_mass(vectors, grid)
    margins = np.abs(np.cos(angles)) - band_cos
    discrete = np.flatnonzero((margins > LATTICE_CONFIG["gap_tolerance"])
                              & (masses >= LATTICE_CONFIG["localization_fraction"]))

    pairs = {}
    for branch, sign in (("plus", 1.0), ("minus", -1.0)):
        candidates = [j for j in discrete if sign * np.cos(angles[j]) > 0]
        if candidates:
            best = max(candidates, key=lambda j: margins[j])
            pairs[branch] = _pair(coin, angles[best], vectors[:, best])

    logger.info(f"✅ 离散谱: {len(discrete)} 个, 角度 {[round(float(angles[j]), 6) for j in discrete]}")
    return SpectralData(coin, angles, vectors, tuple(int(j) for j in discrete), masses, margins,
                        band_cos, pairs, method="dense")


def localized_spectrum(coin: CoinField, core_half_width: int = None) -> SpectralData:
    """
    大格点路径：在居中核心格点上稠密分解得到离散本征对，零填充嵌入后验证残差，
    必要时用 shift-invert 稀疏本征求解精化。只保存离散部分。
    """
    core_half_width = core_half_width or LATTICE_CONFIG["core_half_width"]
    core = full_spectrum(coin.restrict(min(core_half_width, coin.grid.half_width)))
    if not core.has_discrete:
        raise NoDiscreteSpectrumError(f"核心格点 L={core.grid.half_width} 上没有离散谱")

    U = None
    pairs = {}
    for branch, (angle, phi_core) in core.pairs.items():
        phi = phi_core.embed(coin.grid)
        residual = (apply_U(coin, phi) - np.exp(1j * angle) * phi).norm()
        if residual > 1e-10:
            logger.info(f"🔄 嵌入残差 {residual:.2e}，用稀疏 shift-invert 精化 {branch} 分支")
            U = sparse_U(coin) if U is None else U
            vals, vecs = spla.eigs(U, k=1, sigma=np.exp(1j * angle), v0=phi.flat())
            angle = float(np.mod(np.angle(vals[0]), TWO_PI))
            phi = SpinorField.from_flat(coin.grid, vecs[:, 0])
        pairs[branch] = _pair(coin, angle, phi.flat())

    angles = np.array([pairs[b][0] for b in pairs])
    vectors = np.stack([pairs[b][1].flat() for b in pairs], axis=1)
    band_cos = float(np.sqrt(1.0 - abs(coin.alpha_inf) ** 2))
    return SpectralData(coin, angles, None, tuple(range(len(angles))), _site_mass(vectors, coin.grid),
                        np.abs(np.cos(angles)) - band_cos, band_cos, pairs, method="localized")


def spectral_data(coin: CoinField) -> SpectralData:
    """按规模选择稠密或局域化路径"""
    if coin.grid.dim <= LATTICE_CONFIG["dense_threshold"]:
        return full_spectrum(coin)
    return localized_spectrum(coin)


def discrete_eigenpair(sd: SpectralData, branch: str = "plus") -> Tuple[float, SpinorField]:
    """离散本征对 (λ, φ)，φ 已归一化并固定相位"""
    if branch not in ("plus", "minus"):
        raise DomainError(f"branch 只能是 plus 或 minus，收到 {branch}")
    if branch not in sd.pairs:
        raise NoDiscreteSpectrumError(f"预设 {sd.coin.preset} 在 L={sd.grid.half_width} 上没有 {branch} 分支离散谱")
    return sd.pairs[branch]


def chiral_partner(sd: SpectralData) -> Tuple[float, SpinorField]:
    """(λ + π, Zφ)"""
    lam, phi = discrete_eigenpair(sd, "plus")
    partner = zigzag(phi)
    return float(np.mod(lam + np.pi, TWO_PI)), SpinorField(partner.grid, phase_fix(partner.flat()).reshape(-1, 2))


def decay_rate(lam: float, alpha_inf_abs: float) -> float:
    """√(1−|α∞|²) cosh ξ = cos λ"""
    band_cos = np.sqrt(1.0 - alpha_inf_abs ** 2)
    if np.cos(lam) <= band_cos:
        raise DomainError(f"cos λ = {np.cos(lam):.6f} 不在带隙内 (需 > {band_cos:.6f})")
    return float(np.arccosh(np.cos(lam) / band_cos))


def bound_state_condition(lam: float, kappa: float, defect_phase: float) -> float:
    """
    原点相位缺陷模型的本征值条件残差：
    sin(λ−ω) sin λ − √(cos²λ − β∞²) cos(λ−ω) − α∞²，零点即离散本征相位
    """
    a, b = np.sin(kappa), np.cos(kappa)
    if np.cos(lam) <= b:
        raise DomainError("bound_state_condition 仅对 cos λ > β∞ 定义")
    return float(np.sin(lam - defect_phase) * np.sin(lam)
                 - np.sqrt(np.cos(lam) ** 2 - b ** 2) * np.cos(lam - defect_phase) - a ** 2)


def band_from_asymptotic(coin: CoinField, n_k: int = 512) -> Dict[str, float]:
    """由 U∞ 的动量符号 diag(e^{−ik}, e^{ik}) C∞ 数值重算谱带，并报告与 |β∞| 的偏差"""
    ks = np.linspace(-np.pi, np.pi, n_k, endpoint=False)
    c_inf = coin.c_inf
    cosines = []
    for k in ks:
        symbol = np.diag([np.exp(-1j * k), np.exp(1j * k)]) @ c_inf
        cosines.extend(np.cos(np.angle(np.linalg.eigvals(symbol))))
    band_cos = float(np.sqrt(1.0 - abs(coin.alpha_inf) ** 2))
    numeric = float(np.max(np.abs(cosines)))
    discrepancy = abs(numeric - band_cos)
    if discrepancy > 1e-9:
        logger.warning(f"⚠️ 数值谱带 max|cos λ| = {numeric:.12f} 与 |β∞| = {band_cos:.12f} 不一致")
    return {"band_cos": band_cos, "numeric_band_cos": numeric, "discrepancy": discrepancy}


def transfer_matrix(coin: CoinField, lam: float, x: int) -> np.ndarray:
    """
    ψ(x+1) = T_λ(x) ψ(x)，ψ(x) = (φ↓(x−1), φ↑(x))。
    β(x) 为正实数时与 (1−|α|²)^{−1/2} 归一化一致。
    """
    i = coin.grid.index_of(x)
    alpha, beta, theta = coin.alpha[i], coin.beta[i], coin.theta[i]
    if abs(alpha) >= 1.0:
        raise DomainError(f"x={x} 处 |α| = {abs(alpha)} ≥ 1，转移矩阵不存在")
    return _transfer(lam, theta, alpha, beta)


def _transfer(lam: float, theta: float, alpha: complex, beta: complex) -> np.ndarray:
    phase = np.exp(1j * (lam - theta))
    return np.array([[phase, alpha], [np.conj(alpha), 1.0 / phase]], dtype=np.complex128) / np.conj(beta)


def transfer_state(phi: SpinorField, xs: np.ndarray) -> np.ndarray:
    """从本征函数读出转移矩阵变量 (φ↓(x−1), φ↑(x))"""
    return np.array([[phi.at(int(x) - 1)[1], phi.at(int(x))[0]] for x in xs])


@dataclass(frozen=True)
class TransferSolution:
    xs: np.ndarray
    psi: np.ndarray
    xi: float
    iterations: int
    tail_sum: float


def decaying_solution(coin: CoinField, lam: float, x0: int, x_max: int,
                      tol: float = 1e-12, max_iter: int = 200) -> TransferSolution:
    """
    x → +∞ 衰减的解：ψ = P·ν₋^x·(a, b)，P 的列为 T∞ 的本征向量，
    (a, b) 是 X 范数 sup(|a|+|b|) 下压缩映射的不动点，b(∞) = 1, a(∞) = 0。
    """
    band_cos = np.sqrt(1.0 - abs(coin.alpha_inf) ** 2)
    if np.abs(np.cos(lam)) <= band_cos:
        raise DomainError(f"λ = {lam} 落在本质谱带内")
    t_inf = _transfer(lam, 0.0, coin.alpha_inf, coin.beta_inf)
    nus, P = np.linalg.eig(t_inf)
    order = np.argsort(-np.abs(nus))
    nu_plus, nu_minus = nus[order]
    P = P[:, order]
    P_inv = np.linalg.inv(P)
    xi = float(np.log(abs(nu_plus)))

    xs = np.arange(x0, x_max + 1)
    V = np.array([P_inv @ (transfer_matrix(coin, lam, int(x)) - t_inf) @ P for x in xs])
    tail_sum = float(np.sum(np.abs(V)) / abs(nu_minus))
    if tail_sum >= 0.5:
        raise DomainError(f"尾部 l¹ 检查失败: ∑|v| = {tail_sum:.3f} ≥ 0.5，x₀ = {x0} 过小")

    q = nu_minus / nu_plus
    a = np.zeros(len(xs), dtype=np.complex128)
    b = np.ones(len(xs), dtype=np.complex128)
    for iteration in range(1, max_iter + 1):
        f_a = V[:, 0, 0] * a + V[:, 0, 1] * b
        f_b = V[:, 1, 0] * a + V[:, 1, 1] * b
        # s(x) = f(x) + q s(x+1)：反向几何和
        geometric = lfilter([1.0], [1.0, -q], f_a[::-1])[::-1]
        a_new = -geometric / nu_plus
        b_new = 1.0 - np.cumsum((f_b / nu_minus)[::-1])[::-1]
        diff = float(np.max(np.abs(a_new - a) + np.abs(b_new - b)))
        a, b = a_new, b_new
        if diff < tol:
            break
    else:
        raise ConvergenceError(f"转移矩阵不动点在 {max_iter} 次迭代后未收敛")

    scale = nu_minus ** (xs.astype(float))
    psi = (np.stack([a, b], axis=1) @ P.T) * scale[:, None]
    logger.debug(f"衰减解: ξ={xi:.6f}, 迭代 {iteration} 次, 尾部和 {tail_sum:.3e}")
    return TransferSolution(xs, psi, xi, iteration, tail_sum)


def decay_slope(values: np.ndarray, xs: np.ndarray) -> float:
    """log‖v(x)‖ 对 x 的线性拟合斜率"""
    norms = np.linalg.norm(values, axis=1)
    return float(linregress(xs, np.log(norms)).slope)


def eigenfunction_slope(phi: SpinorField, x_lo: int, x_hi: int) -> float:
    """本征函数在 [x_lo, x_hi] 上 log‖φ(x)‖ 对 |x| 的斜率"""
    xs = np.arange(x_lo, x_hi + 1)
    norms = np.array([np.linalg.norm(phi.at(int(x))) for x in xs])
    return float(linregress(np.abs(xs), np.log(norms)).slope)


def Pc(sd: SpectralData, u: SpinorField) -> SpinorField:
    """P_c = 1 − (·, φ₊)φ₊"""
    phi_plus = sd.phi_plus
    return u - inner(u, phi_plus) * phi_plus


def _bordered_solve(sd: SpectralData, point: complex, rhs: np.ndarray) -> np.ndarray:
    """[[U − μ, φ], [φ^*, 0]] 的稀疏 LU 求解，得到 φ^⊥ 中的解"""
    phi = sd.phi.flat()[:, None]
    n = sd.grid.dim
    system = sp.bmat([[sparse_U(sd.coin) - point * sp.identity(n, format="csr"), sp.csr_matrix(phi)],
                      [sp.csr_matrix(phi.conj().T), None]], format="csc")
    solution = spla.splu(system).solve(np.concatenate([rhs, [0.0]]))
    return solution[:n]


def resolvent_solve(sd: SpectralData, mu: complex, f: SpinorField, mode: str = "off_phi") -> SpinorField:
    """
    预解式求解，μ 为复角度参数。

    mode="off_phi": (U − e^{iμ})h = P̃_c f，h ⟂ φ（P̃_c 去掉 φ 分量）
    mode="full":    (U e^{−iμ} − 1)h = f
    """
    if f.grid != sd.grid:
        raise DomainError("右端项与谱数据的格点不一致")
    mu = complex(mu)
    if mode == "off_phi":
        if not sd.has_discrete:
            raise NoDiscreteSpectrumError("off_phi 模式需要离散本征对")
        phi = sd.phi
        projected = f - inner(f, phi) * phi
        point = np.exp(1j * mu)
        if sd.eigenvectors is None:
            return SpinorField.from_flat(sd.grid, _bordered_solve(sd, point, projected.flat()))
        V = sd.eigenvectors
        coeffs = V.conj().T @ projected.flat()
        denominators = np.exp(1j * sd.eigen_angles) - point
        excluded = sd.plus_index()
        if excluded is None:
            raise NoDiscreteSpectrumError("off_phi 模式需要离散本征对")
        denominators[excluded] = 1.0
        coeffs[excluded] = 0.0
        if np.min(np.abs(denominators)) < 1e-10:
            raise NearSingularError("e^{iμ} 与 φ 以外的本征相位过近")
        return SpinorField.from_flat(sd.grid, V @ (coeffs / denominators))

    if mode == "full":
        if sd.eigenvectors is None:
            system = sparse_U(sd.coin) * np.exp(-1j * mu) - sp.identity(sd.grid.dim, format="csc")
            h = spla.splu(system.tocsc()).solve(f.flat())
            if not np.all(np.isfinite(h)):
                raise NearSingularError(f"μ = {mu} 处预解式奇异")
            return SpinorField.from_flat(sd.grid, h)
        denominators = np.exp(1j * sd.eigen_angles) * np.exp(-1j * mu) - 1.0
        if mu.imag == 0.0:
            distance = np.abs(np.angle(np.exp(1j * (sd.eigen_angles - mu.real))))
            if np.min(distance) < 1e-6:
                raise NearSingularError(f"μ = {mu.real} 距本征相位 {np.min(distance):.1e} < 1e-6")
        if np.min(np.abs(denominators)) < 1e-10:
            raise NearSingularError(f"μ = {mu} 距本征相位过近")
        V = sd.eigenvectors
        return SpinorField.from_flat(sd.grid, V @ ((V.conj().T @ f.flat()) / denominators))

    raise DomainError(f"未知的预解式模式: {mode}")


def edge_resonance_proxy(sd: SpectralData, s: float = 2.0, eps_list=(0.1, 0.03, 0.01, 0.003)) -> Dict[str, list]:
    """
    无边缘共振的数值代理：‖⟨x⟩^{−s} R(λ_edge ± iε) ⟨x⟩^{−s}‖ 随 ε 减小的增长倍数
    """
    if sd.eigenvectors is None:
        raise DenseCapError("边缘共振代理需要稠密本征分解")
    V = sd.eigenvectors
    weight = np.repeat(sd.grid.weights(-s), 2)
    WV = weight[:, None] * V
    sups = []
    for eps in eps_list:
        best = 0.0
        for edge in sd.band_edges:
            for sign in (1.0, -1.0):
                mu = edge + sign * 1j * eps
                diag = 1.0 / (np.exp(1j * sd.eigen_angles) * np.exp(-1j * mu) - 1.0)
                best = max(best, float(np.linalg.norm((WV * diag) @ WV.conj().T, ord=2)))
        sups.append(best)
    growth = [sups[k + 1] / sups[k] for k in range(len(sups) - 1)]
    logger.info(f"📈 边缘共振代理 sup 值 {['%.3e' % v for v in sups]}，增长倍数 {['%.2f' % g for g in growth]}")
    return {"eps": list(eps_list), "sup": sups, "growth": growth}
