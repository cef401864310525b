# core/family_manager.py
import asyncio
import logging
from typing import Tuple

from core.MyThreadPool import executor
from core.bound_states import BoundStateFamily
from core.family_loader import _family_load_lock, family_key, get_family, loaded_families
from core.spectral import SpectralData
from core.walk import CoinField, NonlinearCoin

logger = logging.getLogger(__name__)


async def get_cached_family(coin: CoinField, nc: NonlinearCoin) -> Tuple[SpectralData, BoundStateFamily]:
    """
    获取缓存中的束缚态族，如果不存在则在线程池中构造
    """
    key = family_key(coin, nc)

    if key in loaded_families:
        logger.info(f"✅ 从缓存中获取束缚态族: {key}")
        return loaded_families[key]

    logger.info(f"🔄 束缚态族 {key} 未在缓存中，开始异步构造...")
    loop = asyncio.get_running_loop()
    return await loop.run_in_executor(executor, get_family, coin, nc)


def clear_family_cache():
    """清空束缚态族缓存"""
    with _family_load_lock:
        loaded_families.clear()
    logger.info("✅ 束缚态族缓存已清空")


def get_cached_family_names() -> list:
    return list(loaded_families.keys())
