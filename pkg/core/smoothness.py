# core/smoothness.py
"""
有限维酉矩阵的 Kato 光滑性工具：四个正则化量、预解式与 Fourier 恒等式、Stone 公式。

约定 R(μ) = (U e^{−iμ} − 1)^{-1}。在 U 的本征基下
R(λ+iε) − R(λ−iε) 的本征值是 Poisson 核 sinh ε / (cosh ε − cos(θ−λ))。
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import quad
from scipy.stats import unitary_group

from config.settings import SMOOTHNESS_CONFIG
from core.errors import ConvergenceError, DomainError
from core.lattice import make_rng
from core.spectral import SpectralData, unitary_eig

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True, eq=False)
class UnitarySpectrum:
    """酉矩阵及其 Schur 本征基"""
    matrix: np.ndarray
    angles: np.ndarray
    vectors: np.ndarray

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "UnitarySpectrum":
        matrix = np.atleast_2d(np.asarray(matrix, dtype=np.complex128))
        if matrix.shape[0] != matrix.shape[1]:
            raise DomainError(f"U 必须是方阵，收到 {matrix.shape}")
        defect = np.max(np.abs(matrix.conj().T @ matrix - np.eye(matrix.shape[0])))
        if defect > 1e-10:
            raise DomainError(f"U 不是酉矩阵 (‖U*U − 1‖ = {defect:.2e})")
        angles, vectors = unitary_eig(matrix)
        return cls(matrix, angles, vectors)

    @classmethod
    def from_spectral(cls, sd: SpectralData) -> "UnitarySpectrum":
        if sd.eigenvectors is None:
            raise DomainError("需要稠密本征分解得到的谱数据")
        V = sd.eigenvectors
        return cls(V @ (np.exp(1j * sd.eigen_angles)[:, None] * V.conj().T), sd.eigen_angles, V)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def coefficients(self, phi: np.ndarray) -> np.ndarray:
        return self.vectors.conj().T @ phi

    def resolvent_factors(self, mu: complex) -> np.ndarray:
        """R(μ) 在本征基下的对角元"""
        return 1.0 / (np.exp(1j * (self.angles - mu)) - 1.0)

    def operator(self, diagonal: np.ndarray) -> np.ndarray:
        return (self.vectors * diagonal) @ self.vectors.conj().T

    def resolvent(self, mu: complex) -> np.ndarray:
        return self.operator(self.resolvent_factors(mu))

    def poisson(self, lam: float, eps: float) -> np.ndarray:
        return poisson_kernel(eps, self.angles - lam)


SpectrumLike = Union[np.ndarray, UnitarySpectrum]


def _spectrum(U: SpectrumLike) -> UnitarySpectrum:
    return U if isinstance(U, UnitarySpectrum) else UnitarySpectrum.from_matrix(U)


def _weight(A, n: int) -> np.ndarray:
    """权重 A：标量、对角向量或 n×n 矩阵"""
    A = np.asarray(A, dtype=np.complex128)
    if A.ndim == 0:
        return A * np.eye(n)
    if A.ndim == 1:
        if A.shape != (n,):
            raise DomainError(f"对角权重长度 {A.shape[0]} 与维数 {n} 不符")
        return np.diag(A)
    if A.shape != (n, n):
        raise DomainError(f"权重矩阵形状 {A.shape} 与维数 {n} 不符")
    return A


def random_unitary(n: int, seed: int = 0) -> np.ndarray:
    """Haar 随机酉矩阵"""
    return unitary_group.rvs(n, random_state=make_rng(seed))


def poisson_kernel(eps: float, x) -> np.ndarray:
    """∑_t e^{−ε|t|} e^{itx} = sinh ε / (cosh ε − cos x)"""
    return np.sinh(eps) / (np.cosh(eps) - np.cos(x))


def horizon(eps: float, tail: float = None) -> int:
    """最小的 T 使几何尾项 e^{−εT}/(1 − e^{−ε}) 低于 tail"""
    tail = SMOOTHNESS_CONFIG["tail"] if tail is None else tail
    if eps <= 0:
        raise DomainError(f"ε 必须为正，收到 {eps}")
    return int(np.ceil(np.log(1.0 / (tail * -np.expm1(-eps))) / eps)) + 1


def quadrature_size(T: int) -> int:
    return 4 * (T + 1)


def _check_horizon(eps: float, T: int):
    tail = SMOOTHNESS_CONFIG["tail"]
    if np.exp(-eps * T) >= tail:
        raise DomainError(f"T = {T} 对 ε = {eps} 过小：e^{{−εT}} = {np.exp(-eps * T):.2e} ≥ {tail:.0e}")


def _time_series(spec: UnitarySpectrum, A: np.ndarray, phi: np.ndarray, ts: np.ndarray) -> np.ndarray:
    """行 t 为 A U^t φ"""
    c = spec.coefficients(phi)
    states = (np.exp(1j * np.outer(ts, spec.angles)) * c[None, :]) @ spec.vectors.T
    return states @ A.T


def qty_time(A, U: SpectrumLike, phi: np.ndarray, eps: float, T: int = None) -> float:
    """∑_{|t|≤T} e^{−2ε|t|} ‖AU^tφ‖²"""
    spec = _spectrum(U)
    T = horizon(eps) if T is None else T
    _check_horizon(eps, T)
    ts = np.arange(-T, T + 1)
    series = _time_series(spec, _weight(A, spec.dim), np.asarray(phi, dtype=np.complex128), ts)
    return float(np.sum(np.exp(-2.0 * eps * np.abs(ts)) * np.sum(np.abs(series) ** 2, axis=1)))


def _resolvent_images(spec: UnitarySpectrum, A: np.ndarray, phi: np.ndarray, lams: np.ndarray,
                      eps: float) -> Tuple[np.ndarray, np.ndarray]:
    """每个 λ 上的 AR(λ+iε)φ 与 AR(λ−iε)φ"""
    c = spec.coefficients(phi)
    rotation = np.exp(1j * (spec.angles[None, :] - lams[:, None]))
    plus = (c / (rotation * np.exp(eps) - 1.0)) @ spec.vectors.T
    minus = (c / (rotation * np.exp(-eps) - 1.0)) @ spec.vectors.T
    return plus @ A.T, minus @ A.T


def _trapezoid_resolvent(spec: UnitarySpectrum, A: np.ndarray, phi: np.ndarray, eps: float, M: int) -> float:
    lams = TWO_PI * np.arange(M) / M
    plus, minus = _resolvent_images(spec, A, phi, lams, eps)
    return float((np.sum(np.abs(plus) ** 2) + np.sum(np.abs(minus) ** 2)) / M)


def qty_resolvent(A, U: SpectrumLike, phi: np.ndarray, eps: float, M: int = None,
                  check: bool = True) -> float:
    """
    (1/2π)∫_𝕋 (‖AR(λ+iε)φ‖² + ‖AR(λ−iε)φ‖²) dλ，M 点均匀梯形求积。
    check=True 时与 2M 点结果比较，不一致则认为 M 不足。
    """
    spec = _spectrum(U)
    M = quadrature_size(horizon(eps)) if M is None else M
    A = _weight(A, spec.dim)
    phi = np.asarray(phi, dtype=np.complex128)
    value = _trapezoid_resolvent(spec, A, phi, eps, M)
    if check:
        refined = _trapezoid_resolvent(spec, A, phi, eps, 2 * M)
        if abs(refined - value) > 1e-10 * max(abs(refined), 1e-300):
            raise ConvergenceError(f"M = {M} 不足：与 2M 的相对差 {abs(refined - value) / abs(refined):.2e}")
    return value


def _grid_max(func, items: Sequence, workers: int) -> float:
    """固定顺序上的最大值，workers > 1 时并发求值"""
    if len(items) == 0:
        raise DomainError("网格为空")
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="KatoGrid") as pool:
            values = list(pool.map(func, items))
    else:
        values = [func(item) for item in items]
    return float(max(values))


def qty_sup_resolvent(A, U: SpectrumLike, eps_grid: Sequence[float], lam_grid: Sequence[float],
                      workers: int = 1) -> float:
    """(1/2π) max ‖A(R(λ+iε) − R(λ−iε))A*‖，并校验内层算子自伴"""
    spec = _spectrum(U)
    A = _weight(A, spec.dim)
    AV = A @ spec.vectors

    def evaluate(point):
        eps, lam = point
        inner_op = (AV * spec.poisson(lam, eps)) @ AV.conj().T
        scale = max(np.max(np.abs(inner_op)), 1.0)
        asym = np.max(np.abs(inner_op - inner_op.conj().T))
        if asym > 1e-12 * scale:
            logger.warning(f"⚠️ λ={lam:.4f}, ε={eps} 处内层算子偏离自伴 {asym:.2e}")
        return np.linalg.norm(inner_op, 2) / TWO_PI

    points = [(float(e), float(l)) for e in eps_grid for l in lam_grid]
    return _grid_max(evaluate, points, workers)


def positivity_floor(U: SpectrumLike, eps: float, lam_grid: Sequence[float]) -> float:
    """R(λ+iε) − R(λ−iε) 用直接求逆组装后最小本征值的最小值"""
    spec = _spectrum(U)
    floor = np.inf
    for lam in lam_grid:
        difference = _direct_resolvent(spec, lam + 1j * eps) - _direct_resolvent(spec, lam - 1j * eps)
        hermitian = (difference + difference.conj().T) / 2.0
        floor = min(floor, float(np.min(np.linalg.eigvalsh(hermitian))))
    return floor


def _direct_resolvent(spec: UnitarySpectrum, mu: complex) -> np.ndarray:
    n = spec.dim
    return np.linalg.inv(spec.matrix * np.exp(-1j * mu) - np.eye(n))


def resolvent_identity_residual(U: SpectrumLike, lam: float, eps: float) -> float:
    """‖R(λ+iε) − R(λ−iε) − (1 − e^{−2ε}) R(λ−iε)* R(λ−iε)‖ / ‖R(λ+iε) − R(λ−iε)‖，全部直接求逆"""
    spec = _spectrum(U)
    R_plus = _direct_resolvent(spec, lam + 1j * eps)
    R_minus = _direct_resolvent(spec, lam - 1j * eps)
    rhs = -np.expm1(-2.0 * eps) * (R_minus.conj().T @ R_minus)
    difference = R_plus - R_minus
    return float(np.linalg.norm(difference - rhs, 2) / max(np.linalg.norm(difference, 2), 1.0))


def normalization_residual(U: SpectrumLike, phi: np.ndarray, eps: float, M: int = None) -> float:
    """|(1/2π)∫ (φ, (R(λ+iε) − R(λ−iε))φ) dλ − ‖φ‖²|"""
    spec = _spectrum(U)
    M = quadrature_size(horizon(eps)) if M is None else M
    c = spec.coefficients(np.asarray(phi, dtype=np.complex128))
    lams = TWO_PI * np.arange(M) / M
    kernel = poisson_kernel(eps, spec.angles[None, :] - lams[:, None])
    integral = float(np.sum(kernel * np.abs(c[None, :]) ** 2) / M)
    return abs(integral - float(np.sum(np.abs(c) ** 2)))


def _arc_offset(angles: np.ndarray, a: float) -> np.ndarray:
    """从 a 逆时针量到各本征相位的弧长，取值 [0, 2π)"""
    return np.mod(angles - a, TWO_PI)


def spectral_projection(U: SpectrumLike, a: float, b: float, endpoint_weight: Optional[float] = None,
                        tol: float = 1e-9) -> np.ndarray:
    """
    1_{[a,b)}(U) 的本征投影；endpoint_weight 给定时端点上的本征相位取该权重
    （0.5 即 ½(1_{(a,b)} + 1_{[a,b]})）。
    """
    spec = _spectrum(U)
    return spec.operator(_indicator_weights(spec.angles, a, b, endpoint_weight, tol))


def _indicator_weights(angles: np.ndarray, a: float, b: float, endpoint_weight: Optional[float],
                       tol: float) -> np.ndarray:
    width = b - a
    if width <= 0:
        return np.zeros(len(angles))
    if width >= TWO_PI:
        return np.ones(len(angles))
    offsets = _arc_offset(angles, a)
    weights = (offsets < width).astype(float)
    if endpoint_weight is not None:
        at_a = np.minimum(offsets, TWO_PI - offsets) < tol
        at_b = np.abs(offsets - width) < tol
        weights[at_a | at_b] = endpoint_weight
    return weights


def qty_interval(A, U: SpectrumLike, intervals: Sequence[Tuple[float, float]], width_floor: float = None) -> float:
    """max ‖A 1_{[a,b)}(U)‖² / (b − a)，只取宽度不低于 width_floor 的区间"""
    spec = _spectrum(U)
    width_floor = SMOOTHNESS_CONFIG["width_floor"] if width_floor is None else width_floor
    A = _weight(A, spec.dim)
    best, skipped = 0.0, 0
    for a, b in intervals:
        width = b - a
        if width < width_floor:
            skipped += 1
            continue
        projection = spec.operator(_indicator_weights(spec.angles, a, b, None, 0.0))
        best = max(best, float(np.linalg.norm(A @ projection, 2) ** 2 / width))
    if skipped:
        logger.info(f"ℹ️ 跳过 {skipped} 个宽度低于 {width_floor} 的区间")
    return best


def interval_grid(n_starts: int, widths: Sequence[float]) -> List[Tuple[float, float]]:
    starts = TWO_PI * np.arange(n_starts) / n_starts
    return [(float(a), float(a + w)) for w in widths for a in starts]


def stone_weight(theta: float, a: float, b: float, eps: float) -> float:
    """(1/2π)∫_a^b P_ε(θ − λ) dλ，峰值处分段积分"""
    peak = a + _arc_offset(np.array([theta]), a)[0]
    points = [peak] if a < peak < b else None
    value, _ = quad(lambda lam: poisson_kernel(eps, theta - lam), a, b, points=points,
                    limit=400, epsabs=1e-14, epsrel=1e-13)
    return value / TWO_PI


def stone_weight_closed_form(theta: float, a: float, b: float, eps: float) -> float:
    """
    P_ε 的原函数 2 arctan(coth(ε/2) tan(x/2))，在 x = π 处跳 2π；
    把 [θ−b, θ−a] 平移到以 0 为中心的周期内逐段累加。
    """
    def antiderivative(x):
        return 2.0 * np.arctan(np.tanh(eps / 2.0) ** -1 * np.tan(x / 2.0))

    lo, hi = theta - b, theta - a
    total = 0.0
    # 在 x = π + 2πk 处切段
    cuts = np.arange(np.ceil((lo - np.pi) / TWO_PI), np.floor((hi - np.pi) / TWO_PI) + 1) * TWO_PI + np.pi
    edges = [lo, *[c for c in cuts if lo < c < hi], hi]
    for left, right in zip(edges[:-1], edges[1:]):
        shift = TWO_PI * np.round((left + right) / 2.0 / TWO_PI)
        total += antiderivative(right - shift) - antiderivative(left - shift)
    return total / TWO_PI


@dataclass
class StoneResult:
    eps: List[float]
    weights: np.ndarray            # 形状 (len(eps), n)
    extrapolated_weights: np.ndarray
    extrapolated: np.ndarray
    direct: np.ndarray
    deviation: float
    endpoint_indices: List[int] = field(default_factory=list)

    def operator_at(self, spec: UnitarySpectrum, k: int) -> np.ndarray:
        return spec.operator(self.weights[k])


def stone_projection(U: SpectrumLike, a: float, b: float, eps_sequence: Sequence[float] = None,
                     half_weight: bool = True) -> StoneResult:
    """
    各 ε 上的 Stone 积分 (1/2π)∫_a^b (R(λ+iε) − R(λ−iε)) dλ，并用基 [1, ε, ε³, ε⁵] 外推到 ε → 0。
    结果与 ½(1_{(a,b)}(U) + 1_{[a,b]}(U)) 比较。
    """
    spec = _spectrum(U)
    eps_sequence = list(SMOOTHNESS_CONFIG["stone_eps"] if eps_sequence is None else eps_sequence)
    if any(e <= 0 for e in eps_sequence):
        raise DomainError("ε 序列必须全部为正")
    eps_sequence = sorted(eps_sequence, reverse=True)
    n = spec.dim
    direct = spectral_projection(spec, a, b, endpoint_weight=0.5)

    if b - a <= 0 or b - a >= TWO_PI:
        trivial = np.zeros(n) if b - a <= 0 else np.ones(n)
        weights = np.tile(trivial, (len(eps_sequence), 1))
        return StoneResult(eps_sequence, weights, trivial, spec.operator(trivial), direct, 0.0)

    offsets = _arc_offset(spec.angles, a)
    endpoint_distance = np.minimum(np.minimum(offsets, TWO_PI - offsets), np.abs(offsets - (b - a)))
    near = np.flatnonzero(endpoint_distance < 10.0 * min(eps_sequence))
    if near.size and not half_weight:
        raise DomainError(f"本征相位 {spec.angles[near]} 距区间端点不足 10·ε_min，需要端点半权处理")

    weights = np.array([[stone_weight(theta, a, b, eps) for theta in spec.angles] for eps in eps_sequence])
    eps_arr = np.array(eps_sequence)
    basis = np.stack([np.ones_like(eps_arr), eps_arr, eps_arr ** 3, eps_arr ** 5], axis=1)
    coeffs, *_ = np.linalg.lstsq(basis, weights, rcond=None)
    extrapolated_weights = coeffs[0]
    extrapolated = spec.operator(extrapolated_weights)
    deviation = float(np.linalg.norm(extrapolated - direct, 2))
    for j in near:
        logger.info(f"ℹ️ 端点本征相位 θ={spec.angles[j]:.6f} 外推权重 {extrapolated_weights[j]:.4f}")
    return StoneResult(eps_sequence, weights, extrapolated_weights, extrapolated, direct, deviation,
                       [int(j) for j in near])


def fourier_identities_check(A, U: SpectrumLike, phi: np.ndarray, eps: float, T: int = None,
                             n_lambda: int = 64) -> Dict[str, float]:
    """
    截断 DTFT 与预解式表达式的最大偏差（λ 网格 n_lambda 点）：
      forward:  ∑_{t≥0} e^{−εt} AU^tφ e^{−itλ} = −AR(λ−iε)φ
      backward: ∑_{t<0} e^{εt} AU^tφ e^{−itλ} = AR(λ+iε)φ
      two_sided: 两者之和 = A(R(λ+iε) − R(λ−iε))φ
    """
    spec = _spectrum(U)
    T = horizon(eps) if T is None else T
    _check_horizon(eps, T)
    A = _weight(A, spec.dim)
    phi = np.asarray(phi, dtype=np.complex128)
    ts = np.arange(-T, T + 1)
    damped = _time_series(spec, A, phi, ts) * np.exp(-eps * np.abs(ts))[:, None]
    lams = TWO_PI * np.arange(n_lambda) / n_lambda
    phases = np.exp(-1j * np.outer(lams, ts))
    forward_mask, backward_mask = ts >= 0, ts < 0
    forward = phases[:, forward_mask] @ damped[forward_mask]
    backward = phases[:, backward_mask] @ damped[backward_mask]
    plus, minus = _resolvent_images(spec, A, phi, lams, eps)
    report = {
        "forward": float(np.max(np.abs(forward + minus), initial=0.0)),
        "backward": float(np.max(np.abs(backward - plus), initial=0.0)),
        "two_sided": float(np.max(np.abs(forward + backward - (plus - minus)), initial=0.0)),
    }
    logger.debug(f"Fourier 恒等式残差: {report}")
    return report


def kato_sufficient(A, U: SpectrumLike, mu_grid: Sequence[complex], workers: int = 1) -> float:
    """max_μ ‖A R(μ) A*‖，μ 不得在单位圆上"""
    spec = _spectrum(U)
    A = _weight(A, spec.dim)
    AV = A @ spec.vectors
    mu_grid = [complex(mu) for mu in mu_grid]
    if any(mu.imag == 0.0 for mu in mu_grid):
        raise DomainError("μ 网格必须离开单位圆 (Im μ ≠ 0)")

    def evaluate(mu):
        return np.linalg.norm((AV * spec.resolvent_factors(mu)) @ AV.conj().T, 2)

    return _grid_max(evaluate, mu_grid, workers)


def walk_kato_weight(sd: SpectralData, s: float = None) -> np.ndarray:
    """A = ⟨x⟩^{−s} P_c(U)，P_c 去掉全部离散本征向量"""
    s = SMOOTHNESS_CONFIG["weight_s"] if s is None else s
    if sd.eigenvectors is None:
        raise DomainError("walk_kato_weight 需要稠密本征分解")
    weight = np.repeat(sd.grid.weights(-s), 2)
    discrete = sd.eigenvectors[:, list(sd.discrete_indices)]
    Pc = np.eye(sd.grid.dim) - discrete @ discrete.conj().T
    return weight[:, None] * Pc


def lambda_grid(grid_size: int, extra: Sequence[float] = ()) -> np.ndarray:
    return np.sort(np.concatenate([TWO_PI * np.arange(grid_size) / grid_size, np.asarray(extra, dtype=float)]))


def kato_trend(sd: SpectralData, s: float = None, eps_list: Sequence[float] = None, grid_size: int = None,
               workers: int = 1) -> Dict[str, list]:
    """行走实例上的 sup_μ ‖⟨x⟩^{−s}P_c R(μ) P_c⟨x⟩^{−s}‖ 随 ε 的变化，只报告不判定"""
    eps_list = list(SMOOTHNESS_CONFIG["eps_list"] if eps_list is None else eps_list)
    grid_size = SMOOTHNESS_CONFIG["grid_size"] if grid_size is None else grid_size
    spec = UnitarySpectrum.from_spectral(sd)
    A = walk_kato_weight(sd, s)
    lams = lambda_grid(grid_size, sd.band_edges)
    sups = []
    for eps in eps_list:
        mus = [lam + sign * 1j * eps for lam in lams for sign in (1.0, -1.0)]
        sups.append(kato_sufficient(A, spec, mus, workers=workers))
    ratios = [sups[k + 1] / sups[k] if sups[k] > 0 else 0.0 for k in range(len(sups) - 1)]
    logger.info(f"📈 Kato 充分条件趋势: sup = {['%.3e' % v for v in sups]}, 比值 {['%.2f' % r for r in ratios]}")
    return {"eps": eps_list, "sup": sups, "ratio": ratios}


@dataclass
class SmoothnessReport:
    epsilon: float
    horizon: int
    quad_size: int
    qty1: float
    qty2: float
    qty3: float
    qty4: float
    plancherel: float
    resolvent_identity: float
    stone: float
    positivity: float
    normalization: float

    def __post_init__(self):
        for name in ("qty1", "qty2", "qty3", "qty4"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise DomainError(f"{name} = {value} 必须非负且有限")

    def to_row(self) -> dict:
        return asdict(self)


def smoothness_report(A, U: SpectrumLike, phi: np.ndarray, eps: float, grid_size: int = None,
                      width_floor: float = None, workers: int = 1) -> SmoothnessReport:
    """在单个 ε 上计算四个量与全部恒等式残差"""
    spec = _spectrum(U)
    grid_size = SMOOTHNESS_CONFIG["grid_size"] if grid_size is None else grid_size
    width_floor = SMOOTHNESS_CONFIG["width_floor"] if width_floor is None else width_floor
    T = horizon(eps)
    M = quadrature_size(T)
    lams = lambda_grid(grid_size)

    qty1 = qty_time(A, spec, phi, eps, T)
    qty2 = qty_resolvent(A, spec, phi, eps, M)
    qty3 = qty_sup_resolvent(A, spec, [eps], lams, workers=workers)
    widths = [w for w in (4 * width_floor, 2 * width_floor, width_floor)]
    qty4 = qty_interval(A, spec, interval_grid(grid_size, widths), width_floor)

    # Stone 区间端点取两个最大谱隙的中点
    gaps = np.diff(np.concatenate([spec.angles, [spec.angles[0] + TWO_PI]]))
    midpoints = np.mod(spec.angles + gaps / 2.0, TWO_PI)
    order = np.argsort(-gaps, kind="stable")
    if len(order) >= 2:
        a, b = sorted(midpoints[order[:2]])
    else:
        a = midpoints[0]
        b = a + np.pi
    stone = stone_projection(spec, a, b).deviation

    return SmoothnessReport(
        epsilon=eps, horizon=T, quad_size=M, qty1=qty1, qty2=qty2, qty3=qty3, qty4=qty4,
        plancherel=abs(qty1 - qty2) / max(abs(qty1), 1e-300),
        resolvent_identity=max(resolvent_identity_residual(spec, lam, eps) for lam in lams[:8]),
        stone=stone,
        positivity=positivity_floor(spec, eps, lams[:8]),
        normalization=normalization_residual(spec, phi, eps, M),
    )
