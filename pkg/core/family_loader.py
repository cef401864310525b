# core/family_loader.py
import hashlib
import logging
from threading import Lock
from typing import Tuple

import numpy as np

from config.settings import BOUND_STATE_CONFIG, LATTICE_CONFIG
from core.bound_states import BoundStateFamily, build_family
from core.errors import WalkError
from core.spectral import SpectralData, full_spectrum, localized_spectrum
from core.walk import CoinField, NonlinearCoin

logger = logging.getLogger(__name__)

# 缓存已构造的 (谱数据, 束缚态族)
loaded_families = {}
_family_load_lock = Lock()


def family_key(coin: CoinField, nc: NonlinearCoin) -> str:
    """预设名 + 格点 + 硬币数组摘要 + 非线性参数"""
    digest = hashlib.sha1()
    for arr in (coin.theta, coin.alpha, coin.beta, nc.gamma):
        digest.update(np.ascontiguousarray(arr).tobytes())
    return f"{coin.preset}_L{coin.grid.half_width}_c{nc.c:g}_p{nc.p}_{digest.hexdigest()[:12]}"


def _build(coin: CoinField, nc: NonlinearCoin) -> Tuple[SpectralData, BoundStateFamily]:
    if coin.grid.dim <= LATTICE_CONFIG["dense_threshold"]:
        spectral = full_spectrum(coin)
        return spectral, build_family(spectral, nc)
    # 大格点：族在核心格点上求解，再放到局域化谱数据上
    core_half_width = LATTICE_CONFIG["core_half_width"]
    logger.info(f"🧭 L={coin.grid.half_width} 超过稠密阈值，在核心格点 L={core_half_width} 上构造束缚态族")
    core_family = build_family(full_spectrum(coin.restrict(core_half_width)), nc)
    spectral = localized_spectrum(coin, core_half_width)
    return spectral, core_family.embedded(spectral)


def get_family(coin: CoinField, nc: NonlinearCoin) -> Tuple[SpectralData, BoundStateFamily]:
    """
    构造束缚态族并缓存；缓存满时淘汰最早加入的条目
    """
    key = family_key(coin, nc)

    if key in loaded_families:
        return loaded_families[key]

    with _family_load_lock:
        if key not in loaded_families:
            try:
                entry = _build(coin, nc)
            except WalkError:
                raise
            except Exception as e:
                raise RuntimeError(f"束缚态族 {key} 构造失败: {e}") from e
            while len(loaded_families) >= BOUND_STATE_CONFIG["cache_size"]:
                evicted = next(iter(loaded_families))
                loaded_families.pop(evicted)
                logger.info(f"♻️ 缓存已满，淘汰 {evicted}")
            loaded_families[key] = entry
            logger.info(f"✅ 成功构造束缚态族: {key}")

    return loaded_families[key]
