# tests/test_concurrency.py
from types import SimpleNamespace

import pytest

from config.settings import CONCURRENCY_CONFIG, LATTICE_CONFIG
from core.sweep_tools import concurrency_optimizer as co

GB = 1024 ** 3
MIN_WORKERS = CONCURRENCY_CONFIG["min_concurrent_limit"]


@pytest.fixture
def optimizer(monkeypatch):
    state = {"available": 64 * GB, "cpu": 0.0, "mem_percent": 20.0}
    monkeypatch.setattr(co.psutil, "virtual_memory",
                        lambda: SimpleNamespace(available=state["available"], percent=state["mem_percent"]))
    monkeypatch.setattr(co.psutil, "cpu_percent", lambda interval=None: state["cpu"])
    opt = co.ConcurrencyOptimizer()
    opt.system_cores = 8
    opt.state = state
    return opt


def test_dense_solve_footprint():
    assert co.dense_solve_bytes(1024) == 3 * 16 * 1024 ** 2
    assert co.run_bytes(1024) == 256 * 16 * 1024


def test_idle_machine_is_capped_by_config(optimizer):
    workers = optimizer.calculate_optimal_concurrency(10, 1024, consider_system_load=True)
    assert workers == max(MIN_WORKERS, min(4, CONCURRENCY_CONFIG["max_concurrent_limit"]))
    assert optimizer.calculate_optimal_concurrency(1, 1024) == max(MIN_WORKERS, 1)


def test_busy_cpu_leaves_one_worker(optimizer):
    optimizer.state["cpu"] = 100.0
    assert optimizer.calculate_optimal_concurrency(10, 1024, consider_system_load=True) == max(MIN_WORKERS, 1)
    # 不看负载时只受核心与内存限制
    assert optimizer.calculate_optimal_concurrency(10, 1024, consider_system_load=False) == \
        max(MIN_WORKERS, min(4, CONCURRENCY_CONFIG["max_concurrent_limit"]))


def test_dense_reservation_exhausts_memory(optimizer):
    optimizer.state["available"] = 10 * 1024 ** 2
    dim = LATTICE_CONFIG["dense_threshold"]
    assert optimizer._calculate_memory_based(dim) == 1
    assert optimizer.calculate_optimal_concurrency(10, dim, consider_system_load=False) == max(MIN_WORKERS, 1)


def test_system_info_reports_sweep_capacity(optimizer):
    info = optimizer.get_system_info(lattice_dim=1024)
    assert info["dense_slots"] == CONCURRENCY_CONFIG["max_dense_solves"]
    assert info["lattice_dim"] == 1024
    assert 0 < info["max_dense_lattice_dim"] <= LATTICE_CONFIG["dense_cap"]
    assert info["recommended_sweep_workers"] >= 1
    assert info["cpu_usage_percent"] == 0.0
