# core/io_tools/snapshot.py
"""
二进制快照：16 字节小端头 (magic "NLQW", version u32, L u64)，
随后按 x = −L … L−1 每格点四个 f8 (Re u↑, Im u↑, Re u↓, Im u↓)。
"""
import logging
import os
import struct

import numpy as np

from core.errors import DomainError, SnapshotError
from core.lattice import LatticeGrid, SpinorField

logger = logging.getLogger(__name__)

SNAPSHOT_MAGIC = b"NLQW"
SNAPSHOT_VERSION = 1
_HEADER = struct.Struct("<4sIQ")


def write_snapshot(field: SpinorField, path: str) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    data = np.empty((field.grid.n_sites, 4), dtype="<f8")
    data[:, 0], data[:, 1] = field.values[:, 0].real, field.values[:, 0].imag
    data[:, 2], data[:, 3] = field.values[:, 1].real, field.values[:, 1].imag
    with open(path, "wb") as f:
        f.write(_HEADER.pack(SNAPSHOT_MAGIC, SNAPSHOT_VERSION, field.grid.half_width))
        f.write(data.tobytes())
    logger.debug(f"💾 快照已写入 {path} (L={field.grid.half_width})")
    return path


def read_snapshot(path: str) -> SpinorField:
    try:
        with open(path, "rb") as f:
            raw = f.read()
    except OSError as e:
        raise SnapshotError(f"无法读取快照 {path}: {e}") from e
    if len(raw) < _HEADER.size:
        raise SnapshotError(f"快照 {path} 长度 {len(raw)} 小于文件头")
    magic, version, half_width = _HEADER.unpack_from(raw)
    if magic != SNAPSHOT_MAGIC:
        raise SnapshotError(f"快照 {path} 的 magic {magic!r} 不是 {SNAPSHOT_MAGIC!r}")
    if version != SNAPSHOT_VERSION:
        raise SnapshotError(f"快照版本 {version} 与支持的版本 {SNAPSHOT_VERSION} 不匹配")
    expected = _HEADER.size + 2 * half_width * 4 * 8
    if len(raw) != expected:
        raise SnapshotError(f"快照 {path} 长度 {len(raw)}，按 L={half_width} 应为 {expected}")
    data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(-1, 4)
    values = np.stack([data[:, 0] + 1j * data[:, 1], data[:, 2] + 1j * data[:, 3]], axis=1)
    return SpinorField(LatticeGrid(int(half_width)), values)


def snapshot_io(field: SpinorField = None, path: str = "", direction: str = "write"):
    """direction="write" 写出 field 并返回路径；"read" 返回读入的场"""
    if direction == "write":
        if field is None:
            raise DomainError("写快照需要提供 field")
        return write_snapshot(field, path)
    if direction == "read":
        return read_snapshot(path)
    raise DomainError(f"direction 只能是 read 或 write，收到 {direction}")
