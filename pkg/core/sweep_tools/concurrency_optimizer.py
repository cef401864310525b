# core/sweep_tools/concurrency_optimizer.py
import logging
import os

import psutil

from config.settings import CONCURRENCY_CONFIG, LATTICE_CONFIG

logger = logging.getLogger(__name__)

BYTES_PER_COMPLEX = 16
# 每个扫描运行同时持有的状态向量数（当前态、检查点、分解工作区）
STATES_PER_RUN = 256
# 稠密 Schur 分解：原矩阵、T、Z 三个 n×n 复矩阵
MATRICES_PER_DENSE_SOLVE = 3


def dense_solve_bytes(lattice_dim: int) -> int:
    """一次稠密分解的内存占用"""
    return MATRICES_PER_DENSE_SOLVE * BYTES_PER_COMPLEX * lattice_dim ** 2


def run_bytes(lattice_dim: int) -> int:
    return STATES_PER_RUN * BYTES_PER_COMPLEX * lattice_dim


class ConcurrencyOptimizer:
    """并发优化器 - 按空闲核心与扣除稠密分解槽位后的内存估算参数扫描的并发数"""

    def __init__(self):
        self.system_cores = os.cpu_count() or 4
        self.config = CONCURRENCY_CONFIG

    def calculate_optimal_concurrency(self,
                                      total_tasks: int,
                                      lattice_dim: int,
                                      consider_system_load: bool = None) -> int:
        """
        计算扫描的最优并发数

        Args:
            total_tasks: 独立运行的数量
            lattice_dim: 每个运行的向量维数 4L
            consider_system_load: 是否考虑系统当前负载，缺省取配置

        Returns:
            推荐的最大并发数
        """
        if consider_system_load is None:
            consider_system_load = self.config["consider_system_load"]
        cpu_based = self._calculate_cpu_based()
        memory_based = self._calculate_memory_based(lattice_dim)
        load_based = self._calculate_load_based() if consider_system_load else cpu_based

        hard_limit = min(cpu_based, memory_based, self.config["max_concurrent_limit"])
        optimal = min(hard_limit, max(1, total_tasks), load_based)
        optimal = max(optimal, self.config["min_concurrent_limit"])

        logger.debug(f"并发计算详情: cpu_based={cpu_based}, tasks={total_tasks}, "
                     f"memory_based={memory_based}, load_based={load_based}, 最终={optimal}")
        return optimal

    def _calculate_cpu_based(self) -> int:
        # numpy 内部也会用到多线程，留出一半核心
        return max(1, self.system_cores // 2)

    def _reserved_dense_bytes(self, lattice_dim: int) -> int:
        """dense_semaphore 允许的并发稠密分解所需内存"""
        dim = min(max(lattice_dim, 1), LATTICE_CONFIG["dense_threshold"])
        return self.config["max_dense_solves"] * dense_solve_bytes(dim)

    def _calculate_memory_based(self, lattice_dim: int) -> int:
        try:
            available = psutil.virtual_memory().available
        except Exception:
            return self.config["min_concurrent_limit"]
        budget = available * 0.5 - self._reserved_dense_bytes(lattice_dim)
        if budget <= 0:
            logger.warning(f"⚠️ 可用内存 {available / 1024 ** 3:.1f}GB 不足以同时容纳稠密分解与扫描，串行执行")
            return 1
        return max(1, int(budget // max(run_bytes(lattice_dim), 1)))

    def _calculate_load_based(self) -> int:
        """按当前空闲核心折算：已被占用的 CPU 份额不再分给扫描"""
        try:
            cpu_percent = psutil.cpu_percent(interval=0.1)
            if psutil.virtual_memory().percent > 90:
                return 1
        except Exception:
            return max(1, self.system_cores // 4)
        idle_cores = int(self.system_cores * (100.0 - cpu_percent) / 100.0)
        return max(1, idle_cores)

    def get_system_info(self, lattice_dim: int = None) -> dict:
        """扫描容量概览：空闲资源、稠密分解槽位与推荐并发数"""
        lattice_dim = lattice_dim or 4 * LATTICE_CONFIG["default_half_width"]
        try:
            memory = psutil.virtual_memory()
            cpu_percent = psutil.cpu_percent(interval=0.1)
        except Exception:
            return {"cpu_cores": self.system_cores, "error": "无法获取系统信息"}
        # 剩余内存可容纳的最大稠密分解维数
        max_dense_dim = int((memory.available * 0.5 / (MATRICES_PER_DENSE_SOLVE * BYTES_PER_COMPLEX)) ** 0.5)
        return {
            "cpu_cores": self.system_cores,
            "cpu_usage_percent": cpu_percent,
            "memory_available_gb": round(memory.available / (1024 ** 3), 1),
            "dense_slots": self.config["max_dense_solves"],
            "dense_reserved_gb": round(self._reserved_dense_bytes(lattice_dim) / (1024 ** 3), 3),
            "max_dense_lattice_dim": min(max_dense_dim, LATTICE_CONFIG["dense_cap"]),
            "lattice_dim": lattice_dim,
            "recommended_sweep_workers": self.calculate_optimal_concurrency(
                self.config["max_concurrent_limit"], lattice_dim, consider_system_load=False),
        }


# 全局实例
concurrency_optimizer = ConcurrencyOptimizer()


def calculate_optimal_concurrency(total_tasks: int,
                                  lattice_dim: int,
                                  consider_system_load: bool = None) -> int:
    """计算最优并发数（简化接口）"""
    return concurrency_optimizer.calculate_optimal_concurrency(total_tasks, lattice_dim, consider_system_load)
