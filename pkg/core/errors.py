# core/errors.py
"""量子行走实验室的异常层级，CLI 统一映射为退出码 1"""


class WalkError(Exception):
    """所有领域异常的基类"""


class GridMismatchError(WalkError, ValueError):
    """两个场的格点不一致"""


class DomainError(WalkError, ValueError):
    """参数超出定义域（例如 λ 落在本质谱带内）"""


class DenseCapError(WalkError, ValueError):
    """格点规模超过稠密分解上限"""


class NearSingularError(WalkError, ValueError):
    """预解式的谱参数离本征相位过近"""


class NoDiscreteSpectrumError(WalkError, RuntimeError):
    """未找到离散谱"""


class ContractionError(WalkError, RuntimeError):
    """不动点映射不满足压缩条件"""


class ConvergenceError(WalkError, RuntimeError):
    """迭代在最大步数内未收敛"""


class DecompositionError(WalkError, RuntimeError):
    """调制分解的 Newton 迭代发散"""


class WrapContaminationError(WalkError, RuntimeError):
    """边界质量超过阈值，周期绕回污染了结果"""


class ConfigError(WalkError, ValueError):
    """配置文件语法或字段错误"""


class SnapshotError(WalkError, ValueError):
    """快照文件损坏或版本不匹配"""
