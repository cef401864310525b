import atexit
import logging
from concurrent.futures import ThreadPoolExecutor
from threading import Semaphore

from config.settings import CONCURRENCY_CONFIG

logger = logging.getLogger(__name__)

MAX_CONCURRENT = CONCURRENCY_CONFIG["max_concurrent_limit"]

# 稠密本征分解占用大量内存，限制同时进行的数量
dense_semaphore = Semaphore(CONCURRENCY_CONFIG["max_dense_solves"])
# 线程池大小：最大并发数 + 2 缓冲，服务端请求与参数扫描共用
MAX_WORKERS = min(MAX_CONCURRENT + 2, 32)
# 全局线程池
executor = ThreadPoolExecutor(max_workers=MAX_WORKERS, thread_name_prefix="WalkWorker")
logger.info("🚀 全局线程池已就绪")


def shutdown_executor():
    executor.shutdown(wait=True)


atexit.register(shutdown_executor)
