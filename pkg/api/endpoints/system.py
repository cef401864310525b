# api/endpoints/system.py
from fastapi import APIRouter

from config.settings import (BOUND_STATE_CONFIG, CONCURRENCY_CONFIG, DEFAULT_PRESET, EXPERIMENT_CONFIG,
                             LATTICE_CONFIG, MODEL_PRESET_CONFIG, NONLINEAR_CONFIG, OUTPUT_DIR,
                             SUPPORTED_GAMMAS, SUPPORTED_PRESETS)
from core.family_manager import clear_family_cache, get_cached_family_names
from core.sweep_tools.concurrency_optimizer import concurrency_optimizer

router = APIRouter(tags=["system"])


@router.get("/")
async def root():
    return {"message": "Nonlinear Quantum Walk Lab API", "status": "running"}


@router.get("/health")
async def health():
    return {"status": "healthy"}


@router.get("/presets")
async def list_presets():
    """返回支持的硬币预设与非线性 γ"""
    return {"available_presets": SUPPORTED_PRESETS, "available_gammas": SUPPORTED_GAMMAS}


@router.get("/family-cache/status")
async def get_family_cache_status():
    """获取束缚态族缓存状态"""
    names = get_cached_family_names()
    return {"cached_families": names, "cache_size": len(names)}


@router.post("/family-cache/clear")
async def clear_cache():
    """清空束缚态族缓存"""
    clear_family_cache()
    return {"message": "束缚态族缓存已清空"}


@router.get("/config")
async def get_config():
    """返回当前服务配置"""
    return {
        "default_preset": DEFAULT_PRESET,
        "model_preset_config": MODEL_PRESET_CONFIG,
        "nonlinear_config": NONLINEAR_CONFIG,
        "lattice_config": LATTICE_CONFIG,
        "bound_state_config": BOUND_STATE_CONFIG,
        "experiment_config": EXPERIMENT_CONFIG,
        "output_directory": OUTPUT_DIR,
        "concurrency_config": CONCURRENCY_CONFIG,
        "system_info": concurrency_optimizer.get_system_info(),
    }
