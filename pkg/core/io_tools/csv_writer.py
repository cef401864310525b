# core/io_tools/csv_writer.py
import csv
import logging
import os
from typing import Any, Dict, List, Sequence

from core.errors import DomainError
from core.walk import CoinField

logger = logging.getLogger(__name__)


def emit_csv(rows: Sequence[Dict[str, Any]], path: str, fieldnames: List[str] = None) -> str:
    """带表头的 UTF-8 CSV，字段顺序取第一行（或 fieldnames）"""
    if not rows and not fieldnames:
        raise DomainError(f"没有可写入 {path} 的行，也没有给出表头")
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    fieldnames = fieldnames or list(rows[0].keys())
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _format(v) for k, v in row.items()})
    logger.info(f"📄 已写入 {len(rows)} 行到 {path}")
    return path


def _format(value):
    # repr 保证浮点往返精确，确定性输出
    if isinstance(value, float):
        return repr(float(value))
    return value


def read_csv(path: str) -> List[Dict[str, str]]:
    with open(path, "r", newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


def write_coin_csv(coin: CoinField, path: str) -> str:
    return emit_csv(coin.to_rows(), path)


def read_coin_csv(path: str, alpha_inf: complex, beta_inf: complex) -> CoinField:
    return CoinField.from_rows(read_csv(path), alpha_inf, beta_inf)
