# core/walk.py
"""
线性行走 U = SĈ 与非线性硬币 N_{γ,g}(u) = e^{i g(⟨u,γu⟩) γ} u。

所有函数对不可变输入是纯函数；DN 只对 u 实线性。
"""
import logging
from dataclasses import dataclass, field
from typing import List

import numpy as np
import scipy.sparse as sp

from config.settings import MODEL_PRESET_CONFIG, SUPPORTED_GAMMAS, SUPPORTED_PRESETS
from core.errors import DomainError, GridMismatchError
from core.lattice import LatticeGrid, SpinorField

logger = logging.getLogger(__name__)

UNITARITY_TOL = 1e-12
HERMITIAN_TOL = 1e-14


@dataclass(frozen=True, eq=False)
class CoinField:
    grid: LatticeGrid
    theta: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    alpha_inf: complex
    beta_inf: complex
    preset: str = "custom"

    def __post_init__(self):
        n = self.grid.n_sites
        theta = np.array(self.theta, dtype=float, copy=True)
        alpha = np.array(self.alpha, dtype=np.complex128, copy=True)
        beta = np.array(self.beta, dtype=np.complex128, copy=True)
        for name, arr in (("theta", theta), ("alpha", alpha), ("beta", beta)):
            if arr.shape != (n,):
                raise GridMismatchError(f"{name} 的长度 {arr.shape} 与 2L={n} 不符")
        defect = np.max(np.abs(np.abs(alpha) ** 2 + np.abs(beta) ** 2 - 1.0))
        if defect > UNITARITY_TOL:
            raise DomainError(f"|α|²+|β|² 偏离 1 达 {defect:.2e}，硬币不是酉矩阵")
        a_inf = abs(self.alpha_inf)
        if not 0.0 < a_inf < 1.0:
            raise DomainError(f"要求 0 < |α∞| < 1，收到 {a_inf}")
        if abs(a_inf ** 2 + abs(self.beta_inf) ** 2 - 1.0) > UNITARITY_TOL:
            raise DomainError("渐近硬币 C∞ 不是酉矩阵")

        matrices = np.empty((n, 2, 2), dtype=np.complex128)
        phase = np.exp(1j * theta)
        matrices[:, 0, 0] = phase * beta
        matrices[:, 0, 1] = phase * np.conj(alpha)
        matrices[:, 1, 0] = -phase * alpha
        matrices[:, 1, 1] = phase * np.conj(beta)
        for arr in (theta, alpha, beta, matrices):
            arr.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "alpha_inf", complex(self.alpha_inf))
        object.__setattr__(self, "beta_inf", complex(self.beta_inf))
        object.__setattr__(self, "_matrices", matrices)
        logger.debug(f"硬币场 {self.preset}: L={self.grid.half_width}, "
                     f"l^{{1,1}} 扰动 = {self.perturbation_size():.3e}")

    @property
    def matrices(self) -> np.ndarray:
        """逐点硬币矩阵，形状 (2L, 2, 2)"""
        return self._matrices

    @property
    def c_inf(self) -> np.ndarray:
        a, b = self.alpha_inf, self.beta_inf
        return np.array([[b, np.conj(a)], [-a, np.conj(b)]], dtype=np.complex128)

    def perturbation_size(self) -> float:
        """∑ₓ ⟨x⟩‖C(x) − C∞‖"""
        diffs = np.linalg.norm(self.matrices - self.c_inf[None, :, :], ord=2, axis=(1, 2))
        return float(np.sum(self.grid.weights(1.0) * diffs))

    def asymptotic(self) -> "CoinField":
        """同一格点上的平移不变硬币 C∞"""
        n = self.grid.n_sites
        return CoinField(self.grid, np.zeros(n), np.full(n, self.alpha_inf),
                         np.full(n, self.beta_inf), self.alpha_inf, self.beta_inf, preset="free")

    def restrict(self, half_width: int) -> "CoinField":
        """截取居中的较小格点"""
        if half_width > self.grid.half_width:
            raise DomainError(f"restrict 的半宽 {half_width} 超过当前 {self.grid.half_width}")
        grid = LatticeGrid(half_width)
        lo = self.grid.half_width - half_width
        hi = lo + grid.n_sites
        return CoinField(grid, self.theta[lo:hi], self.alpha[lo:hi], self.beta[lo:hi],
                         self.alpha_inf, self.beta_inf, preset=self.preset)

    def to_rows(self) -> List[dict]:
        """CSV 行：(x, θ, Re α, Im α, Re β, Im β)"""
        return [
            {"x": int(x), "theta": float(t), "re_alpha": float(a.real), "im_alpha": float(a.imag),
             "re_beta": float(b.real), "im_beta": float(b.imag)}
            for x, t, a, b in zip(self.grid.coords, self.theta, self.alpha, self.beta)
        ]

    @classmethod
    def from_rows(cls, rows: List[dict], alpha_inf: complex, beta_inf: complex) -> "CoinField":
        rows = sorted(rows, key=lambda r: int(r["x"]))
        n = len(rows)
        if n % 2 or int(rows[0]["x"]) != -n // 2:
            raise DomainError("硬币 CSV 必须覆盖 x = −L … L−1")
        grid = LatticeGrid(n // 2)
        theta = [float(r["theta"]) for r in rows]
        alpha = [complex(float(r["re_alpha"]), float(r["im_alpha"])) for r in rows]
        beta = [complex(float(r["re_beta"]), float(r["im_beta"])) for r in rows]
        return cls(grid, theta, alpha, beta, alpha_inf, beta_inf, preset="custom")


def build_coin(preset: str, grid: LatticeGrid, kappa: float = None, defect_phase: float = None,
               tail_amplitude: float = None, tail_length: float = None) -> CoinField:
    """
    按名称构造模型预设

    kls-origin 只在原点加相位缺陷 θ(0)（默认 π/2），原点的 κ 与 κ∞ 相同，
    不取原点 κ₀ = 1.2 的硬币；这一组参数恰有一对手征离散本征值
    λ₊ = 2π + arg((3+4i)/(3+7i))，见 bound_state_condition。
    smooth-tail 在同样的相位缺陷上再加振幅扰动 κ(x) = κ∞ + a·e^{−|x|/ℓ}。

    Args:
        preset: kls-origin / free / identity / smooth-tail
        grid: 格点
        kappa: α∞ = sin κ, β∞ = cos κ
        defect_phase: 原点处的相位 θ(0)
    """
    if preset not in SUPPORTED_PRESETS:
        raise DomainError(f"不支持的预设: {preset}。支持的预设: {', '.join(SUPPORTED_PRESETS)}")
    kappa = MODEL_PRESET_CONFIG["kappa"] if kappa is None else kappa
    defect_phase = MODEL_PRESET_CONFIG["defect_phase"] if defect_phase is None else defect_phase
    tail_amplitude = MODEL_PRESET_CONFIG["tail_amplitude"] if tail_amplitude is None else tail_amplitude
    tail_length = MODEL_PRESET_CONFIG["tail_length"] if tail_length is None else tail_length

    n = grid.n_sites
    alpha_inf, beta_inf = np.sin(kappa), np.cos(kappa)
    theta = np.zeros(n)
    kappas = np.full(n, kappa)

    if preset == "identity":
        return CoinField(grid, theta, np.zeros(n), np.ones(n), alpha_inf, beta_inf, preset=preset)
    if preset in ("kls-origin", "smooth-tail"):
        theta[grid.index_of(0)] = defect_phase
    if preset == "smooth-tail":
        kappas = kappa + tail_amplitude * np.exp(-np.abs(grid.coords) / tail_length)
    return CoinField(grid, theta, np.sin(kappas), np.cos(kappas), alpha_inf, beta_inf, preset=preset)


def _gamma_matrix(name: str) -> np.ndarray:
    if name == "sigma3":
        return np.diag([1.0, -1.0]).astype(np.complex128)
    if name == "sigma1":
        return np.array([[0.0, 1.0], [1.0, 0.0]], dtype=np.complex128)
    if name == "identity":
        return np.eye(2, dtype=np.complex128)
    raise DomainError(f"不支持的 γ: {name}。支持: {', '.join(SUPPORTED_GAMMAS)}")


@dataclass(frozen=True, eq=False)
class NonlinearCoin:
    gamma: np.ndarray = field(default_factory=lambda: _gamma_matrix("sigma3"))
    c: float = 1.0
    p: int = 3

    def __post_init__(self):
        gamma = np.array(self.gamma, dtype=np.complex128, copy=True)
        if gamma.shape != (2, 2):
            raise DomainError(f"γ 必须是 2×2 矩阵，收到 {gamma.shape}")
        if np.max(np.abs(gamma - gamma.conj().T)) > HERMITIAN_TOL:
            raise DomainError("γ 不是自伴矩阵")
        if int(self.p) != self.p or self.p < 1:
            raise DomainError(f"g(s) = c·s^p 要求 p 为正整数，收到 {self.p}")
        evals, evecs = np.linalg.eigh(gamma)
        gamma.setflags(write=False)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "p", int(self.p))
        object.__setattr__(self, "c", float(self.c))
        object.__setattr__(self, "_evals", evals)
        object.__setattr__(self, "_evecs", evecs)

    @classmethod
    def from_choice(cls, gamma: str = "sigma3", c: float = 1.0, p: int = 3) -> "NonlinearCoin":
        return cls(_gamma_matrix(gamma), c, p)

    @property
    def is_linear(self) -> bool:
        return self.c == 0.0

    def g(self, s):
        return self.c * np.asarray(s, dtype=float) ** self.p

    def g_prime(self, s):
        return self.c * self.p * np.asarray(s, dtype=float) ** (self.p - 1)

    def site_pairing(self, u: np.ndarray, w: np.ndarray = None) -> np.ndarray:
        """逐点 ⟨u(x), γw(x)⟩_{ℂ²}；w 缺省时为 m = ⟨u, γu⟩"""
        w = u if w is None else w
        gw = w @ self.gamma.T
        return np.real(np.sum(u * np.conj(gw), axis=1))

    def rotate(self, values: np.ndarray, eigen_factors: np.ndarray) -> np.ndarray:
        """逐点作用 V diag(f) V^*，f 形状 (2L, 2) 对应 γ 的两个本征通道"""
        V = self._evecs
        return ((values @ V.conj()) * eigen_factors) @ V.T

    def phases(self, m: np.ndarray, sign: float = 1.0) -> np.ndarray:
        return np.exp(sign * 1j * self.g(m)[:, None] * self._evals[None, :])

    def scaled_kernel(self, r: float, m: np.ndarray) -> np.ndarray:
        """
        r^{-1}(e^{i g(r m) d} − 1)，d 为 γ 的本征值；r → 0 取解析极限。
        用 (e^{iy}−1)/(iy) = sinc(y/π) + i (y/2) sinc(y/2π)² 避免 0/0。
        """
        y_over_r = self.c * r ** (self.p - 1) * m[:, None] ** self.p * self._evals[None, :]
        y = r * y_over_r
        phi1 = np.sinc(y / np.pi) + 1j * (y / 2.0) * np.sinc(y / (2.0 * np.pi)) ** 2
        return 1j * y_over_r * phi1


def _check_grid(coin: CoinField, u: SpinorField):
    if coin.grid != u.grid:
        raise GridMismatchError(f"硬币格点 L={coin.grid.half_width} 与场格点 L={u.grid.half_width} 不一致")


def shift(u: SpinorField) -> SpinorField:
    """Su(x) = (u↑(x−1), u↓(x+1))"""
    values = np.empty_like(u.values)
    values[:, 0] = np.roll(u.values[:, 0], 1)
    values[:, 1] = np.roll(u.values[:, 1], -1)
    return SpinorField(u.grid, values)


def shift_inv(u: SpinorField) -> SpinorField:
    values = np.empty_like(u.values)
    values[:, 0] = np.roll(u.values[:, 0], -1)
    values[:, 1] = np.roll(u.values[:, 1], 1)
    return SpinorField(u.grid, values)


def apply_coin(coin: CoinField, u: SpinorField) -> SpinorField:
    _check_grid(coin, u)
    return SpinorField(u.grid, np.einsum("xij,xj->xi", coin.matrices, u.values))


def apply_coin_inv(coin: CoinField, u: SpinorField) -> SpinorField:
    _check_grid(coin, u)
    return SpinorField(u.grid, np.einsum("xji,xj->xi", coin.matrices.conj(), u.values))


def apply_U(coin: CoinField, u: SpinorField) -> SpinorField:
    return shift(apply_coin(coin, u))


def apply_U_inv(coin: CoinField, u: SpinorField) -> SpinorField:
    return apply_coin_inv(coin, shift_inv(u))


def sparse_U(coin: CoinField) -> sp.csr_matrix:
    """U 的 4L×4L 稀疏矩阵，扁平下标 2i + c"""
    n = coin.grid.n_sites
    i = np.arange(n)
    im, ip = (i - 1) % n, (i + 1) % n
    M = coin.matrices
    rows = np.concatenate([2 * i, 2 * i, 2 * i + 1, 2 * i + 1])
    cols = np.concatenate([2 * im, 2 * im + 1, 2 * ip, 2 * ip + 1])
    data = np.concatenate([M[im, 0, 0], M[im, 0, 1], M[ip, 1, 0], M[ip, 1, 1]])
    return sp.csr_matrix((data, (rows, cols)), shape=(2 * n, 2 * n))


def dense_U(coin: CoinField) -> np.ndarray:
    return sparse_U(coin).toarray()


def apply_N(nc: NonlinearCoin, u: SpinorField) -> SpinorField:
    if nc.is_linear:
        return u
    m = nc.site_pairing(u.values)
    return SpinorField(u.grid, nc.rotate(u.values, nc.phases(m)))


def _apply_A_values(nc: NonlinearCoin, w: np.ndarray, u: np.ndarray) -> np.ndarray:
    gw = w @ nc.gamma.T
    m = nc.site_pairing(w)
    pairing = np.real(np.sum(u * np.conj(gw), axis=1))
    return (2.0 * nc.g_prime(m) * pairing)[:, None] * 1j * gw


def apply_A(nc: NonlinearCoin, w: SpinorField, u: SpinorField) -> SpinorField:
    """A(w)u = 2g′(⟨w,γw⟩)⟨u,γw⟩ iγw，逐点幂零"""
    if w.grid != u.grid:
        raise GridMismatchError("apply_A 的两个场格点不一致")
    return SpinorField(u.grid, _apply_A_values(nc, w.values, u.values))


def apply_DN(nc: NonlinearCoin, w: SpinorField, u: SpinorField) -> SpinorField:
    """DN(w)u = e^{i g(m)γ}(u + A(w)u)"""
    if w.grid != u.grid:
        raise GridMismatchError("apply_DN 的两个场格点不一致")
    if nc.is_linear:
        return u
    m = nc.site_pairing(w.values)
    values = u.values + _apply_A_values(nc, w.values, u.values)
    return SpinorField(u.grid, nc.rotate(values, nc.phases(m)))


def apply_DN_inv(nc: NonlinearCoin, w: SpinorField, u: SpinorField) -> SpinorField:
    """DN(w)^{-1} = (1 − A(w)) e^{−i g(m)γ}"""
    if w.grid != u.grid:
        raise GridMismatchError("apply_DN_inv 的两个场格点不一致")
    if nc.is_linear:
        return u
    m = nc.site_pairing(w.values)
    rotated = nc.rotate(u.values, nc.phases(m, sign=-1.0))
    return SpinorField(u.grid, rotated - _apply_A_values(nc, w.values, rotated))


def step(coin: CoinField, nc: NonlinearCoin, u: SpinorField) -> SpinorField:
    """u(t+1) = UN(u(t))"""
    return apply_U(coin, apply_N(nc, u))


def double_step(coin: CoinField, nc: NonlinearCoin, u: SpinorField) -> SpinorField:
    """𝒰(u) = UN(UN(u))"""
    return step(coin, nc, step(coin, nc, u))


def apply_L(coin: CoinField, nc: NonlinearCoin, phi_plus_z: SpinorField, xi: SpinorField) -> SpinorField:
    """L[z]ξ = U DN(UN(Φ₊)) U DN(Φ₊) ξ"""
    first = apply_U(coin, apply_DN(nc, phi_plus_z, xi))
    return apply_U(coin, apply_DN(nc, step(coin, nc, phi_plus_z), first))


def apply_L_inv(coin: CoinField, nc: NonlinearCoin, phi_plus_z: SpinorField, v: SpinorField) -> SpinorField:
    """L[z]^{-1} = DN(Φ₊)^{-1} U^{-1} DN(UN(Φ₊))^{-1} U^{-1}"""
    inner_part = apply_DN_inv(nc, step(coin, nc, phi_plus_z), apply_U_inv(coin, v))
    return apply_DN_inv(nc, phi_plus_z, apply_U_inv(coin, inner_part))
