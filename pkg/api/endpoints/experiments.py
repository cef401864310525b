# api/endpoints/experiments.py
import asyncio
import logging
import os

from fastapi import APIRouter

from config.experiment_config import parse_config
from config.response_schema import (ApiResponse, BoundStateRequest, DecayFitRequest, KatoCheckRequest,
                                    SpectrumRequest)
from config.settings import OUTPUT_DIR, SUPPORTED_PRESETS
from core.MyThreadPool import executor
from core.bound_states import bound_state_residual, double_step_residual, eval_Lambda, eval_Phi
from core.errors import WalkError
from core.experiments import run_decay_fit, run_kato_check
from core.family_manager import get_cached_family
from core.lattice import LatticeGrid
from core.spectral import band_from_asymptotic, decay_rate, full_spectrum
from core.walk import NonlinearCoin, build_coin

router = APIRouter(tags=["experiments"])

logger = logging.getLogger(__name__)

API_OUTPUT_DIR = os.path.join(OUTPUT_DIR, "api")


def _error(e: Exception) -> ApiResponse:
    # 参数类错误 400，其余 500
    if isinstance(e, WalkError) and isinstance(e, ValueError):
        return ApiResponse.error_response(str(e), 400)
    return ApiResponse.error_response(f"处理失败: {str(e)}", 500)


def _check_preset(preset: str):
    if preset not in SUPPORTED_PRESETS:
        return ApiResponse.error_response(f"不支持的预设。请选择: {', '.join(SUPPORTED_PRESETS)}", 400)
    return None


def _spectrum_summary(request: SpectrumRequest) -> dict:
    coin = build_coin(request.preset, LatticeGrid(request.half_width), kappa=request.kappa)
    spectral = full_spectrum(coin)
    summary = {
        "preset": coin.preset,
        "half_width": coin.grid.half_width,
        "band": band_from_asymptotic(coin),
        "discrete_angles": [float(spectral.eigen_angles[j]) for j in spectral.discrete_indices],
    }
    if spectral.has_discrete:
        summary["lambda"] = spectral.lam
        summary["decay_rate"] = decay_rate(spectral.lam, abs(coin.alpha_inf))
    return summary


@router.post("/spectrum")
async def spectrum(request: SpectrumRequest):
    invalid = _check_preset(request.preset)
    if invalid:
        return invalid
    try:
        loop = asyncio.get_running_loop()
        data = await loop.run_in_executor(executor, _spectrum_summary, request)
        return ApiResponse.success_response(data=data, message="谱计算成功")
    except Exception as e:
        logger.error(f"谱计算失败: {e}")
        return _error(e)


@router.post("/boundstate")
async def boundstate(request: BoundStateRequest):
    invalid = _check_preset(request.preset)
    if invalid:
        return invalid
    try:
        coin = build_coin(request.preset, LatticeGrid(request.half_width))
        nc = NonlinearCoin.from_choice(request.gamma, request.c, request.p)
        _, family = await get_cached_family(coin, nc)
        z = complex(request.z_re, request.z_im)

        def evaluate():
            Phi = eval_Phi(family, z)
            return {
                "lambda": family.lam,
                "r_max": family.r_max,
                "Lambda": eval_Lambda(family, z),
                "phi_deviation": (Phi - z * family.phi).norm(),
                "residual": bound_state_residual(family, z),
                "double_step_residual": double_step_residual(family, z),
            }

        loop = asyncio.get_running_loop()
        data = await loop.run_in_executor(executor, evaluate)
        return ApiResponse.success_response(data=data, message="束缚态求值成功")
    except Exception as e:
        logger.error(f"束缚态求值失败: {e}")
        return _error(e)


@router.post("/decay-fit")
async def decay_fit(request: DecayFitRequest):
    invalid = _check_preset(request.preset)
    if invalid:
        return invalid
    try:
        cfg = parse_config({
            "preset": request.preset,
            "half_width": request.half_width,
            "decay_window": [request.t_min, request.t_max],
            "single_step": request.single_step,
            "out_dir": API_OUTPUT_DIR,
        })
        loop = asyncio.get_running_loop()
        result = await loop.run_in_executor(executor, run_decay_fit, cfg, request.control)
        return ApiResponse.success_response(data=result["report"], message="衰减拟合完成")
    except Exception as e:
        logger.error(f"衰减拟合失败: {e}")
        return _error(e)


@router.post("/kato-check")
async def kato_check(request: KatoCheckRequest):
    invalid = _check_preset(request.preset)
    if invalid:
        return invalid
    try:
        cfg = parse_config({
            "preset": request.preset,
            "half_width": request.half_width,
            "kato_eps": request.eps_list,
            "kato_s": request.s,
            "kato_grid_size": request.grid_size,
            "seed": request.seed,
            "out_dir": API_OUTPUT_DIR,
        })
        loop = asyncio.get_running_loop()
        result = await loop.run_in_executor(executor, run_kato_check, cfg, request.instances)
        data = {
            "all_pass": result["all_pass"],
            "rows": result["rows"],
            "trend": result["trend"],
        }
        return ApiResponse.success_response(data=data, message="Kato 检查完成")
    except Exception as e:
        logger.error(f"Kato 检查失败: {e}")
        return _error(e)
