# api/app.py
import logging
from contextlib import asynccontextmanager

from fastapi import FastAPI

from api.endpoints import experiments, system
from config.settings import DEFAULT_PRESET, NONLINEAR_CONFIG, OUTPUT_DIR
from core.MyThreadPool import executor
from core.family_manager import clear_family_cache, get_cached_family
from core.lattice import LatticeGrid
from core.walk import NonlinearCoin, build_coin

# 配置日志
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

WARMUP_HALF_WIDTH = 64


@asynccontextmanager
async def lifespan(app: FastAPI):
    """服务生命周期管理"""
    logger.info("🚀 非线性量子行走实验服务启动中...")
    logger.info(f"📁 输出目录: {OUTPUT_DIR}")
    logger.info(f"🔧 默认配置: preset={DEFAULT_PRESET}, g(s) = {NONLINEAR_CONFIG['c']}·s^{NONLINEAR_CONFIG['p']}")

    try:
        # 预热默认束缚态族
        coin = build_coin(DEFAULT_PRESET, LatticeGrid(WARMUP_HALF_WIDTH))
        nc = NonlinearCoin.from_choice(NONLINEAR_CONFIG["gamma"], NONLINEAR_CONFIG["c"], NONLINEAR_CONFIG["p"])
        await get_cached_family(coin, nc)
        logger.info("✅ 默认束缚态族预热完成！")
    except Exception as e:
        logger.warning(f"⚠️  束缚态族预热失败: {e}。服务仍可启动，但首次请求可能会较慢。")

    yield  # 应用在此运行

    # shutdown
    logger.info("🛑 服务关闭中，正在清理束缚态族缓存...")
    try:
        clear_family_cache()
    except Exception as e:
        logger.warning(f"清理缓存失败: {e}")

    logger.info("🛑 服务关闭中，正在关闭线程池...")
    executor.shutdown(wait=True)
    logger.info("✅ 线程池已安全关闭")


# 创建FastAPI应用
app = FastAPI(
    title="非线性量子行走实验 API",
    description="一维非线性离散时间量子行走：谱、束缚态、色散衰减与 Kato 光滑性检查",
    version="1.0.0",
    lifespan=lifespan
)

# 注册路由
app.include_router(system.router)
app.include_router(experiments.router, prefix="/api/walk")
