"""
三角形上的对称求积公式（重心坐标形式）

- 3 点公式：二次多项式精确，用于光滑场的 L² 投影。
- 7 点公式：五次多项式精确，用于不连续的图像数据。
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict

import numpy as np


@dataclass(frozen=True)
class QuadratureRule:
    """
    求积公式。

    Attributes:
        name: 公式名称。
        barycentric: 求积点的重心坐标，shape (q, 3)。
        weights: 相对于三角形面积的权重，shape (q,)，和为 1。
    """

    name: str
    barycentric: np.ndarray
    weights: np.ndarray

    @property
    def num_points(self) -> int:
        return int(self.weights.shape[0])

    def physical_points(self, corners: np.ndarray) -> np.ndarray:
        """
        将重心坐标映射到物理坐标。

        Args:
            corners: 三角形顶点坐标，shape (nt, 3, 2)。

        Returns:
            shape (nt, q, 2) 的求积点。
        """
        return np.einsum("qk,tkd->tqd", self.barycentric, corners)


def _three_point() -> QuadratureRule:
    a, b = 2.0 / 3.0, 1.0 / 6.0
    bary = np.array([[a, b, b], [b, a, b], [b, b, a]])
    return QuadratureRule("3-point", bary, np.full(3, 1.0 / 3.0))


def _seven_point() -> QuadratureRule:
    s15 = np.sqrt(15.0)
    a1 = (6.0 - s15) / 21.0
    a2 = (6.0 + s15) / 21.0
    w1 = (155.0 - s15) / 1200.0
    w2 = (155.0 + s15) / 1200.0
    third = 1.0 / 3.0
    bary = np.array(
        [
            [third, third, third],
            [1.0 - 2.0 * a1, a1, a1],
            [a1, 1.0 - 2.0 * a1, a1],
            [a1, a1, 1.0 - 2.0 * a1],
            [1.0 - 2.0 * a2, a2, a2],
            [a2, 1.0 - 2.0 * a2, a2],
            [a2, a2, 1.0 - 2.0 * a2],
        ]
    )
    weights = np.array([9.0 / 40.0, w1, w1, w1, w2, w2, w2])
    return QuadratureRule("7-point", bary, weights)


_RULES: Dict[int, QuadratureRule] = {
    3: _three_point(),
    7: _seven_point(),
}


def get_rule(points: int) -> QuadratureRule:
    """
    按点数获取求积公式。

    Raises:
        ValueError: 不支持的点数（只有 3 和 7）。
    """
    try:
        return _RULES[int(points)]
    except KeyError:
        raise ValueError(f"不支持的求积公式点数: {points}（可选 3 或 7）") from None
