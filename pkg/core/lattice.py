# core/lattice.py
"""
截断格点上的 ℂ² 值序列：内积、加权范数、zig-zag 变换、P± 投影以及时空范数诊断。

格点 x ∈ {−L, …, L−1}，周期边界，数组下标 i 对应 x = i − L。
SpinorField.values 形状为 (2L, 2)，第二维为 (u↑, u↓)。
"""
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from config.settings import WRAP_GUARD_CONFIG
from core.errors import DomainError, GridMismatchError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LatticeGrid:
    half_width: int
    boundary: str = "periodic"

    def __post_init__(self):
        if int(self.half_width) != self.half_width or self.half_width < 2:
            raise DomainError(f"格点半宽必须是 ≥ 2 的整数，收到 {self.half_width}")
        if self.boundary != "periodic":
            raise DomainError(f"仅支持周期边界，收到 {self.boundary}")

    @property
    def n_sites(self) -> int:
        return 2 * self.half_width

    @property
    def dim(self) -> int:
        """复向量维数 4L"""
        return 4 * self.half_width

    @property
    def coords(self) -> np.ndarray:
        return np.arange(-self.half_width, self.half_width)

    def index_of(self, x: int) -> int:
        if not -self.half_width <= x < self.half_width:
            raise DomainError(f"格点 {x} 超出 [{-self.half_width}, {self.half_width})")
        return x + self.half_width

    def weights(self, s: float) -> np.ndarray:
        """⟨x⟩^s，使用中心化的有符号坐标"""
        return (1.0 + self.coords.astype(float) ** 2) ** (s / 2.0)


@dataclass(frozen=True, eq=False)
class SpinorField:
    grid: LatticeGrid
    values: np.ndarray

    # numpy 标量与场相乘时交给 __rmul__
    __array_ufunc__ = None

    def __post_init__(self):
        values = np.array(self.values, dtype=np.complex128, copy=True)
        if values.shape != (self.grid.n_sites, 2):
            raise GridMismatchError(
                f"场的形状 {values.shape} 与格点 (2L={self.grid.n_sites}, 2) 不符"
            )
        if not np.all(np.isfinite(values)):
            raise DomainError("场中含有非有限值")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid: LatticeGrid) -> "SpinorField":
        return cls(grid, np.zeros((grid.n_sites, 2), dtype=np.complex128))

    @classmethod
    def from_flat(cls, grid: LatticeGrid, vector: np.ndarray) -> "SpinorField":
        """扁平下标 2i + c ↔ (site i, 分量 c)"""
        return cls(grid, np.asarray(vector).reshape(grid.n_sites, 2))

    @classmethod
    def delta(cls, grid: LatticeGrid, x: int, spinor=(1.0, 0.0)) -> "SpinorField":
        values = np.zeros((grid.n_sites, 2), dtype=np.complex128)
        values[grid.index_of(x)] = spinor
        return cls(grid, values)

    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def site_norms(self) -> np.ndarray:
        return np.sqrt(np.sum(np.abs(self.values) ** 2, axis=1))

    def at(self, x: int) -> np.ndarray:
        return self.values[self.grid.index_of(x)]

    def embed(self, grid: LatticeGrid) -> "SpinorField":
        """零填充到更大的居中格点"""
        if grid.half_width < self.grid.half_width:
            raise DomainError("embed 只能嵌入更大的格点，缩小请用 restrict")
        offset = grid.half_width - self.grid.half_width
        values = np.zeros((grid.n_sites, 2), dtype=np.complex128)
        values[offset:offset + self.grid.n_sites] = self.values
        return SpinorField(grid, values)

    def restrict(self, grid: LatticeGrid) -> "SpinorField":
        if grid.half_width > self.grid.half_width:
            raise DomainError("restrict 只能截取更小的居中格点")
        offset = self.grid.half_width - grid.half_width
        return SpinorField(grid, self.values[offset:offset + grid.n_sites])

    def _check(self, other: "SpinorField"):
        if self.grid != other.grid:
            raise GridMismatchError(f"格点不一致: {self.grid} vs {other.grid}")

    def __add__(self, other: "SpinorField") -> "SpinorField":
        self._check(other)
        return SpinorField(self.grid, self.values + other.values)

    def __sub__(self, other: "SpinorField") -> "SpinorField":
        self._check(other)
        return SpinorField(self.grid, self.values - other.values)

    def __mul__(self, scalar) -> "SpinorField":
        return SpinorField(self.grid, self.values * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar) -> "SpinorField":
        return SpinorField(self.grid, self.values / scalar)

    def __neg__(self) -> "SpinorField":
        return SpinorField(self.grid, -self.values)


def _same_grid(u: SpinorField, v: SpinorField):
    if u.grid != v.grid:
        raise GridMismatchError(f"格点不一致: L={u.grid.half_width} vs L={v.grid.half_width}")


def inner(u: SpinorField, v: SpinorField) -> complex:
    """(u, v) = ∑ₓ (u(x), v(x))_{ℂ²}，对第一个参数线性"""
    _same_grid(u, v)
    return complex(np.vdot(v.values, u.values))


def real_inner(u: SpinorField, v: SpinorField) -> float:
    """⟨u, v⟩ = Re(u, v)"""
    return inner(u, v).real


def weighted_norm(u: SpinorField, p: float = 2.0, s: float = 0.0) -> float:
    """‖u‖_{l^{p,s}}，权重 ⟨x⟩ = (1 + x²)^{1/2}"""
    if p < 1:
        raise DomainError(f"l^p 范数要求 p ≥ 1，收到 p={p}")
    weighted = u.grid.weights(s) * u.site_norms()
    if np.isinf(p):
        return float(np.max(weighted))
    return float(np.sum(weighted ** p) ** (1.0 / p))


def zigzag(u: SpinorField) -> SpinorField:
    """Zu(x) = (−1)^x u(x)"""
    signs = np.where(u.grid.coords % 2 == 0, 1.0, -1.0)
    return SpinorField(u.grid, u.values * signs[:, None])


def proj_pm(u: SpinorField, sign: str = "+") -> SpinorField:
    """P± = ½(1 ± Z)"""
    if sign not in ("+", "-"):
        raise DomainError(f"sign 只能是 '+' 或 '-'，收到 {sign!r}")
    keep = 0 if sign == "+" else 1
    mask = (u.grid.coords % 2 == keep).astype(float)
    return SpinorField(u.grid, u.values * mask[:, None])


def stz_norm(series: Sequence[SpinorField], kind: str = "Stz", s: float = 0.0) -> float:
    """
    时空范数诊断

    Args:
        series: 时间序列
        kind: "Stz" → l⁶l^∞ ∩ l^∞l²；"Stz*" → 对偶范数的可计算上界；"l2_weighted" → l²_t l^{2,s}_x
        s: l2_weighted 的空间权重指数

    Returns:
        范数值
    """
    if len(series) == 0:
        raise DomainError("时间序列为空")
    if kind == "Stz":
        return max(stz_parts(series))
    if kind == "Stz*":
        l2_space = np.array([u.norm() for u in series])
        l1_space = np.array([weighted_norm(u, 1.0, 0.0) for u in series])
        # 每个时间片整体归入较小的一项
        to_l1l2 = l2_space <= l1_space
        greedy = np.sum(l2_space[to_l1l2]) + np.sum(l1_space[~to_l1l2] ** 1.2) ** (5.0 / 6.0)
        all_l1l2 = np.sum(l2_space)
        all_l65l1 = np.sum(l1_space ** 1.2) ** (5.0 / 6.0)
        return float(min(greedy, all_l1l2, all_l65l1))
    if kind == "l2_weighted":
        return float(np.sqrt(sum(weighted_norm(u, 2.0, s) ** 2 for u in series)))
    raise DomainError(f"未知的时空范数类型: {kind}")


def stz_parts(series: Sequence[SpinorField]) -> tuple:
    """返回 (l⁶_t l^∞_x, l^∞_t l²_x) 两部分"""
    if len(series) == 0:
        raise DomainError("时间序列为空")
    sup_space = np.array([weighted_norm(u, np.inf, 0.0) for u in series])
    l2_space = np.array([u.norm() for u in series])
    return float(np.sum(sup_space ** 6) ** (1.0 / 6.0)), float(np.max(l2_space))


def boundary_mass(u: SpinorField, width: int = None) -> float:
    """距周期边界 width 个格点以内的 l² 质量（平方）"""
    width = WRAP_GUARD_CONFIG["width"] if width is None else width
    norms2 = u.site_norms() ** 2
    return float(np.sum(norms2[:width]) + np.sum(norms2[-width:]))


def check_wrap(u: SpinorField, width: int = None, threshold: float = None, label: str = "") -> bool:
    """边界质量低于阈值返回 True，否则记录警告"""
    threshold = WRAP_GUARD_CONFIG["threshold"] if threshold is None else threshold
    mass = boundary_mass(u, width)
    if mass > threshold:
        logger.warning(f"⚠️ 边界质量 {mass:.3e} 超过阈值 {threshold:.1e} {label}")
        return False
    return True


def make_rng(seed: int) -> np.random.Generator:
    """计数器型随机数发生器（Philox），按种子可复现"""
    return np.random.Generator(np.random.Philox(key=seed))


def gaussian_profile(grid: LatticeGrid, width: float, center: int = 0,
                     spinor=(1.0, 1.0j)) -> SpinorField:
    envelope = np.exp(-((grid.coords - center) / width) ** 2 / 2.0)
    spinor = np.asarray(spinor, dtype=np.complex128) / np.linalg.norm(spinor)
    return SpinorField(grid, envelope[:, None] * spinor[None, :])


def random_field(grid: LatticeGrid, rng: np.random.Generator, width: float = None) -> SpinorField:
    """复高斯随机场，width 给定时乘以宽度为 width 的高斯包络"""
    values = rng.standard_normal((grid.n_sites, 2)) + 1j * rng.standard_normal((grid.n_sites, 2))
    if width is not None:
        values *= np.exp(-(grid.coords / width) ** 2 / 2.0)[:, None]
    return SpinorField(grid, values)
