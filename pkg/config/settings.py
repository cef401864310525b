# config/settings.py

# 全局配置文件，默认参数适配普通桌面级主机，可通过环境变量覆盖

import math
import os


# 工具函数：安全转换类型
def _int_env(key, default):
    value = os.getenv(key)
    return int(value) if value and value.lstrip("-").isdigit() else default


def _float_env(key, default):
    value = os.getenv(key)
    return float(value) if value else default


def _bool_env(key, default):
    value = os.getenv(key)
    return value.lower() == "true" if value else default


# 1. 模型预设配置
DEFAULT_PRESET = os.getenv("WALK_PRESET", "kls-origin")

SUPPORTED_PRESETS = [
    "kls-origin",   # 仅在原点处加相位缺陷的硬币
    "free",         # C ≡ C∞，平移不变
    "identity",     # C ≡ 1，U = S
    "smooth-tail",  # 原点缺陷 + 指数衰减的 α 扰动
]

MODEL_PRESET_CONFIG = {
    "kappa": _float_env("WALK_KAPPA", 0.6435),                     # α∞ = sin κ, β∞ = cos κ
    "defect_phase": _float_env("WALK_DEFECT_PHASE", math.pi / 2),   # θ(0)
    "tail_amplitude": _float_env("WALK_TAIL_AMPLITUDE", 0.05),     # smooth-tail 的 κ 扰动幅度
    "tail_length": _float_env("WALK_TAIL_LENGTH", 2.0),            # smooth-tail 的衰减长度（格点）
}

# 2. 非线性硬币配置 g(s) = c·s^p
NONLINEAR_CONFIG = {
    "c": _float_env("NONLINEAR_C", 1.0),
    "p": _int_env("NONLINEAR_P", 3),
    "gamma": os.getenv("NONLINEAR_GAMMA", "sigma3"),
}

SUPPORTED_GAMMAS = ["sigma3", "sigma1", "identity"]

# 3. 格点配置
LATTICE_CONFIG = {
    "default_half_width": _int_env("LATTICE_HALF_WIDTH", 256),
    "dense_cap": _int_env("DENSE_CAP", 8192),                  # 4L 超过此值拒绝稠密分解
    "dense_threshold": _int_env("DENSE_THRESHOLD", 2048),      # 4L 超过此值走局域化路径
    "core_half_width": _int_env("CORE_HALF_WIDTH", 128),       # 局域化路径的中心格点半宽
    "localization_fraction": _float_env("LOCALIZATION_FRACTION", 0.99),
    "gap_tolerance": _float_env("GAP_TOLERANCE", 1e-9),
}

# 4. 边界质量（绕回）警戒
WRAP_GUARD_CONFIG = {
    "width": _int_env("WRAP_GUARD_WIDTH", 10),
    "threshold": _float_env("WRAP_GUARD_THRESHOLD", 1e-8),
}

# 5. 非线性束缚态配置
BOUND_STATE_CONFIG = {
    "r_max_seed": _float_env("BOUND_STATE_R_MAX", 0.04),       # δ² 的初始猜测，按需折半
    "max_halvings": _int_env("BOUND_STATE_MAX_HALVINGS", 20),
    "nodes": _int_env("BOUND_STATE_NODES", 32),                # Chebyshev 节点数
    "tolerance": _float_env("BOUND_STATE_TOL", 1e-12),
    "max_iter": _int_env("BOUND_STATE_MAX_ITER", 200),
    "contraction_margin": _float_env("BOUND_STATE_CONTRACTION", 0.5),
    "interp_tolerance": _float_env("BOUND_STATE_INTERP_TOL", 1e-9),
    "derivative_step": _float_env("BOUND_STATE_DERIV_STEP", 1e-3),  # 相对 r_max
    "cache_size": _int_env("FAMILY_CACHE_SIZE", 32),
}

# 6. 调制坐标配置
MODULATION_CONFIG = {
    "newton_tolerance": _float_env("MODULATION_NEWTON_TOL", 1e-11),
    "newton_max_iter": _int_env("MODULATION_NEWTON_MAX_ITER", 25),
    "fd_step": _float_env("MODULATION_FD_STEP", 1e-6),
    "membership_tolerance": _float_env("MODULATION_HC_TOL", 1e-9),
    "continuous_tolerance": _float_env("MODULATION_PC_TOL", 1e-10),
}

# 7. Kato 光滑性配置
SMOOTHNESS_CONFIG = {
    "tail": _float_env("SMOOTHNESS_TAIL", 1e-10),              # e^{-εT} 必须低于此值
    "eps_list": [0.1, 0.03, 0.01, 0.003],
    "stone_eps": [0.03, 0.01, 0.003, 0.001],
    "width_floor": _float_env("SMOOTHNESS_WIDTH_FLOOR", 0.05),
    "weight_s": _float_env("SMOOTHNESS_WEIGHT_S", 2.0),
    "grid_size": _int_env("SMOOTHNESS_GRID_SIZE", 64),
    "walk_half_width": _int_env("SMOOTHNESS_WALK_HALF_WIDTH", 64),   # kato-check 行走实例的格点上限
}

# 8. 实验判定配置（工程阈值，非理论常数）
EXPERIMENT_CONFIG = {
    "cauchy_factor": _float_env("CAUCHY_FACTOR", 1.5),
    "cauchy_threshold": _float_env("CAUCHY_THRESHOLD", 1e-2),   # 相对于初始连续部分的范数
    "resolution_factor": _float_env("RESOLUTION_FACTOR", 0.1),  # 残差 ≤ factor·ε
    "tail_fraction": _float_env("TAIL_FRACTION", 0.25),
    "rho_variation": _float_env("RHO_VARIATION", 0.02),
    "z_plateau": _float_env("Z_PLATEAU", 0.01),
    "profile_width": _float_env("PROFILE_WIDTH", 8.0),
    "decay_tolerance": _float_env("DECAY_TOLERANCE", 0.05),
}

# 9. 输出目录
OUTPUT_DIR = os.getenv("OUTPUT_DIR", "./runs")

# 10. 服务器配置
HOST = os.getenv("HOST", "0.0.0.0")
PORT = _int_env("PORT", 9898)
RELOAD = _bool_env("RELOAD", False)
WORKERS = _int_env("WORKERS", 1)

# 11. 并发处理配置
CONCURRENCY_CONFIG = {
    "min_concurrent_limit": _int_env("MIN_CONCURRENT", 1),
    "max_concurrent_limit": _int_env("MAX_CONCURRENT_LIMIT", 4),
    "max_dense_solves": _int_env("MAX_DENSE_SOLVES", 1),        # 同时进行的稠密分解数
    "consider_system_load": _bool_env("CONSIDER_SYSTEM_LOAD", True),
}
