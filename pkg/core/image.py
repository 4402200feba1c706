"""
合成测试图像与栅格化

测试图像 g̃ = 0.5·𝟙_square + 𝟙_disk：
- 正方形边长 1/2，位于区域中心，即 [0.25, 0.75]²；
- 圆盘半径 1/4，圆心 (0.7, 0.5)（由中心向右平移 0.2）。
两块叠加处取值 1.5，灰度映射时饱和为 255。
观测数据 g_h = g̃_h + ξ_h，ξ_h 为逐节点独立的 amplitude·U(-1, 1)。
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from utils.logger import get_logger

from .fespace import CR, P1, FeSpace, State, evaluate, make_space, nodal_interpolate, project_p0
from .mesh import build_crisscross
from .noise import DATA_STREAM, substream


logger = get_logger()

SQUARE_BOUNDS = (0.25, 0.25, 0.75, 0.75)
SQUARE_HEIGHT = 0.5
DISK_CENTER = (0.7, 0.5)
DISK_RADIUS = 0.25
MIN_RESOLUTION = 16


@dataclass(frozen=True, eq=False)
class ImageField:
    """
    数据空间（P1）上的测试图像。

    Attributes:
        space: 数据空间。
        clean: 干净图像 g̃_h。
        noise: 噪声 ξ_h。
        noisy: 观测数据 g_h = g̃_h + ξ_h。
    """

    space: FeSpace
    clean: State
    noise: State
    noisy: State


def clean_image(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """g̃(x, y) = 0.5·𝟙_square + 𝟙_disk（闭集）。"""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x0, y0, x1, y1 = SQUARE_BOUNDS
    square = (x >= x0) & (x <= x1) & (y >= y0) & (y <= y1)
    disk = (x - DISK_CENTER[0]) ** 2 + (y - DISK_CENTER[1]) ** 2 <= DISK_RADIUS**2
    return SQUARE_HEIGHT * square + 1.0 * disk


def make_test_image(seed: int, level: int = 6, amplitude: float = 0.1, space: FeSpace | None = None) -> ImageField:
    """
    在第 level 层 P1 数据网格上生成测试图像。

    Args:
        seed: 噪声种子，同一种子得到逐位相同的数据。
        level: 数据网格层数。
        amplitude: 噪声幅值，ξ ∈ [-amplitude, amplitude]。
        space: 已构造好的第 level 层 P1 空间（可选，便于复用）。
    """
    if amplitude < 0:
        raise ValueError(f"噪声幅值必须 ≥ 0, got {amplitude}")
    if space is None:
        space = make_space(build_crisscross(level), P1)
    elif space.kind != P1 or space.mesh.level != level:
        raise ValueError(f"数据空间必须是第 {level} 层 P1 空间, got {space.describe()}")
    clean = nodal_interpolate(space, clean_image)
    xi = amplitude * substream(seed, DATA_STREAM).uniform(-1.0, 1.0, space.dof_count)
    noise = State(space, xi)
    noisy = State(space, clean.coefficients + xi)
    logger.info("测试图像已生成: level=%d, dofs=%d, amplitude=%g, seed=%d", level, space.dof_count, amplitude, seed)
    return ImageField(space=space, clean=clean, noise=noise, noisy=noisy)


def pixel_centers(resolution: int) -> np.ndarray:
    """
    像素中心坐标，shape (resolution², 2)，按行优先排列；第 0 行对应 y 最大处（图像上方）。
    """
    c = (np.arange(resolution) + 0.5) / resolution
    xx, yy = np.meshgrid(c, c[::-1])
    return np.column_stack([xx.ravel(), yy.ravel()])


def sample_raster(space: FeSpace, state: State | np.ndarray, resolution: int, piecewise_constant: bool = False) -> np.ndarray:
    """
    在像素中心对有限元函数取值，shape (resolution, resolution)。

    Args:
        piecewise_constant: 为 True 时取 Π⁰_h 投影（所在三角形的均值）。
    """
    if resolution < MIN_RESOLUTION:
        raise ValueError(f"分辨率必须 ≥ {MIN_RESOLUTION}, got {resolution}")
    points = pixel_centers(resolution)
    if piecewise_constant:
        tri, _ = space.mesh.locate(points)
        values = project_p0(space, state)[tri]
    else:
        values = evaluate(space, state, points)
    return values.reshape(resolution, resolution)


def to_gray(values: np.ndarray) -> np.ndarray:
    """灰度映射 clamp(round(255·u))，结果为 uint8。"""
    return np.clip(np.rint(255.0 * np.asarray(values, dtype=float)), 0, 255).astype(np.uint8)


def render_image(space: FeSpace, state: State | np.ndarray, resolution: int = 256, piecewise_constant: bool | None = None) -> np.ndarray:
    """
    把有限元函数渲染为 8 位灰度栅格。

    Args:
        piecewise_constant: None 时 CR 取 Π⁰_h 投影，P1 逐点取值。

    Returns:
        shape (resolution, resolution) 的 uint8 数组。
    """
    if piecewise_constant is None:
        piecewise_constant = space.kind == CR
    return to_gray(sample_raster(space, state, resolution, piecewise_constant))
