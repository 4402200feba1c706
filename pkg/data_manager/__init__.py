"""
数据管理模块

包含：
- trajectory_storage: 轨迹与噪声增量的二进制存储（小端序），以及回放用的读取器
- image_writer: 灰度栅格的 PGM / PNG 输出
"""

from .trajectory_storage import (
    NoiseDump,
    TrajectoryDump,
    TrajectoryStorageError,
    read_noise,
    read_trajectory,
    replay_states,
    write_noise,
    write_trajectory,
)
from .image_writer import read_pgm, write_pgm, write_png

__all__ = [
    "NoiseDump",
    "TrajectoryDump",
    "TrajectoryStorageError",
    "read_noise",
    "read_trajectory",
    "replay_states",
    "write_noise",
    "write_trajectory",
    "read_pgm",
    "write_pgm",
    "write_png",
]
