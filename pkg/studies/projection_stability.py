"""
L² 投影的 H¹ 稳定性

对光滑测试族 v = sin(kπx)sin(mπy)（k, m ≤ max_mode），在各网格层上测量
κ = ‖∇_h P_h v‖ / ‖∇v‖，其中 ‖∇v‖ = π√(k²+m²)/2；判定 max κ ≤ 2。
"""

from __future__ import annotations

from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from core.factory import build_space
from core.fespace import h1_seminorm, l2_project
from utils.logger import get_logger

from .base import BaseStudy


logger = get_logger()

MAX_KAPPA = 2.0
PROJECTION_QUADRATURE = 7


def sine_mode(k: int, m: int):
    """sin(kπx)sin(mπy)。"""

    def f(x, y):
        return np.sin(k * np.pi * x) * np.sin(m * np.pi * y)

    return f


def exact_h1_seminorm(k: int, m: int) -> float:
    return float(np.pi * np.sqrt(k * k + m * m) / 2.0)


class ProjectionStabilityStudy(BaseStudy):
    """测量 L² 投影在 H¹₀ 半范数下的稳定常数。"""

    name = "projection-stability"
    chinese_name = "投影稳定性"
    doc = """
# 投影稳定性

在 levels 给出的每个网格层、每个模态 (k, m) 上计算 ‖∇_h P_h v‖ 与精确值之比。
CR 单元使用逐单元梯度 ∇_h。
"""
    params_table = """
| 配置项 | 含义 | 默认值 |
|--------|------|--------|
| levels | 网格层数列表 | [2, 3, 4, 5, 6] |
| max_mode | 模态上界 | 3 |
| element | 单元类型 | p1 |
| linear_solver | 投影时的线性求解方式 | direct |
"""

    def execute(self) -> Tuple[Optional[bool], Dict[str, Any]]:
        cfg = self.config
        rows: List[Dict[str, Any]] = []
        for level in cfg.levels:
            space = build_space(level, cfg.element)
            for k in range(1, cfg.max_mode + 1):
                for m in range(1, cfg.max_mode + 1):
                    projected = l2_project(
                        space,
                        sine_mode(k, m),
                        quadrature=PROJECTION_QUADRATURE,
                        method=cfg.linear_solver,
                        tol=cfg.linear_tol,
                    )
                    value = h1_seminorm(space, projected)
                    exact = exact_h1_seminorm(k, m)
                    rows.append(
                        {"level": level, "k": k, "m": m, "projected_h1": value, "exact_h1": exact, "ratio": value / exact}
                    )
            logger.debug("投影稳定性: level=%d, max ratio=%.4f", level, max(r["ratio"] for r in rows if r["level"] == level))
        self.export(rows, "projection", "projection.csv")
        kappa = max(r["ratio"] for r in rows)
        worst = max(rows, key=lambda r: r["ratio"])
        logger.info("投影稳定性: kappa=%.4f (level=%d, k=%d, m=%d)", kappa, worst["level"], worst["k"], worst["m"])
        return bool(kappa <= MAX_KAPPA), {
            "element": cfg.element,
            "levels": " ".join(str(l) for l in cfg.levels),
            "max_mode": cfg.max_mode,
            "kappa": kappa,
            "max_kappa": MAX_KAPPA,
        }
