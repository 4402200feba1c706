"""
场函数库

提供可以在 x0、g 场表达式中直接调用的函数。
所有函数都是无状态、逐点向量化的：参数可以是标量，也可以是同形状的 numpy 数组。
"""

from __future__ import annotations

from typing import Union

import numpy as np

ArrayLike = Union[float, np.ndarray]


def indicator_box(x: ArrayLike, y: ArrayLike, x0: float, y0: float, x1: float, y1: float) -> np.ndarray:
    """
    矩形 [x0, x1] × [y0, y1]（闭集）的示性函数。

    Examples:
        indicator_box(0.5, 0.5, 0.25, 0.25, 0.75, 0.75) -> 1.0
        indicator_box(0.0, 0.0, 0.25, 0.25, 0.75, 0.75) -> 0.0
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    inside = (x >= x0) & (x <= x1) & (y >= y0) & (y <= y1)
    return inside.astype(float)


def indicator_disk(x: ArrayLike, y: ArrayLike, cx: float, cy: float, radius: float) -> np.ndarray:
    """
    闭圆盘 |p - c| ≤ radius 的示性函数。

    Raises:
        ValueError: radius < 0
    """
    if radius < 0:
        raise ValueError(f"半径不能为负数: {radius}")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return (((x - cx) ** 2 + (y - cy) ** 2) <= radius * radius).astype(float)


def sqrt_func(x: ArrayLike) -> np.ndarray:
    """
    逐点平方根。

    Raises:
        ValueError: 存在负数
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError(f"sqrt 函数不能接受负数: min={float(np.min(x))}")
    return np.sqrt(x)


def clip_func(x: ArrayLike, lo: float, hi: float) -> np.ndarray:
    """把 x 截断到 [lo, hi]。"""
    if lo > hi:
        raise ValueError(f"clip 下界大于上界: {lo} > {hi}")
    return np.clip(np.asarray(x, dtype=float), lo, hi)
