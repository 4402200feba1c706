"""
图像输出

- PGM：P5 二进制 8 位灰度，直接写出；
- PNG：通过 matplotlib.image.imsave 写出。
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from matplotlib import image as mpl_image

from utils.logger import get_logger


logger = get_logger()


def _check_raster(raster: np.ndarray) -> np.ndarray:
    raster = np.asarray(raster)
    if raster.ndim != 2 or raster.dtype != np.uint8:
        raise ValueError(f"栅格必须是二维 uint8 数组, got shape={raster.shape}, dtype={raster.dtype}")
    return raster


def write_pgm(raster: np.ndarray, path: str | Path) -> Path:
    """写出 P5 格式的 PGM 文件（maxval 255）。"""
    raster = _check_raster(raster)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    height, width = raster.shape
    with path.open("wb") as f:
        f.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        f.write(np.ascontiguousarray(raster).tobytes())
    logger.info("PGM 已写入: %s (%dx%d)", path, width, height)
    return path


def read_pgm(path: str | Path) -> np.ndarray:
    """读取本模块写出的 P5 PGM 文件（不支持注释行）。"""
    raw = Path(path).read_bytes()
    parts = raw.split(b"\n", 3)
    if len(parts) != 4 or parts[0] != b"P5" or parts[2] != b"255":
        raise ValueError(f"不是 8 位 P5 PGM 文件: {path}")
    width, height = (int(v) for v in parts[1].split())
    data = np.frombuffer(parts[3], dtype=np.uint8)
    if data.size != width * height:
        raise ValueError(f"PGM 数据长度不符: {data.size} != {width * height}")
    return data.reshape(height, width).copy()


def write_png(raster: np.ndarray, path: str | Path) -> Path:
    """写出灰度 PNG（0 为黑，255 为白）。"""
    raster = _check_raster(raster)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mpl_image.imsave(path, raster, cmap="gray", vmin=0, vmax=255, format="png")
    logger.info("PNG 已写入: %s", path)
    return path
