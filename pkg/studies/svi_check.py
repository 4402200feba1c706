"""
离散随机变分不等式检验

在 M 条轨迹上对测试过程族检验

    E[½‖X^i - U^i‖² + τΣ_{ℓ≤i} J_ε(X^ℓ)]
        ≤ E[½‖x⁰ - u⁰‖² + τΣ_{ℓ≤i}(J_ε(U^ℓ) + (G^ℓ, X^ℓ - U^ℓ)) + ½τΣ_{ℓ≤i}‖P_hB(X^{ℓ-1}) - H^{ℓ-1}‖²_HS]

oracle 族（H = P_hB）总是参与检验，它逐路径成立；配置的族另行检验。
"""

from __future__ import annotations

from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from core.factory import build_scenario
from core.fespace import FeSpace
from core.mc import run_realizations
from core.noise import NoiseModel
from core.scheme import Trajectory
from core.svi import (
    FrozenCoefficientFamily,
    OracleFamily,
    SviReport,
    TestFamily,
    ZeroFamily,
    svi_terms,
    max_squared_norm,
    summarize_svi,
)
from utils.logger import get_logger

from .base import BaseStudy


logger = get_logger()


def make_family(name: str, space: FeSpace, model: NoiseModel, j0: int = 4, seed: int = 0) -> TestFamily:
    """按名称构造测试过程族（zero / oracle / frozen）。"""
    if name == "zero":
        return ZeroFamily(space)
    if name == "oracle":
        return OracleFamily(model, space)
    if name == "frozen":
        return FrozenCoefficientFamily(space, j0=j0, seed=seed)
    raise ValueError(f"未知的测试过程族: {name}")


class SviCollector:
    """每次实现：各族不等式两侧的路径值与 max_ℓ‖X^ℓ‖²。"""

    def __init__(self, families: List[TestFamily]) -> None:
        self.families = families

    def __call__(self, traj: Trajectory) -> Dict[str, Any]:
        return {
            "terms": {family.name: svi_terms(traj, family) for family in self.families},
            "max_sq_norm": max_squared_norm(traj),
        }


def report_rows(report: SviReport) -> List[Dict[str, Any]]:
    return [
        {
            "family": report.family,
            "i": row.index,
            "t": row.time,
            "lhs_mean": row.lhs,
            "lhs_stderr": row.lhs_stderr,
            "rhs_mean": row.rhs,
            "rhs_stderr": row.rhs_stderr,
            "budget": row.budget,
            "margin": row.margin,
        }
        for row in report.rows
    ]


class SviCheckStudy(BaseStudy):
    """离散随机变分不等式的 Monte Carlo 检验。"""

    name = "svi-check"
    chinese_name = "离散变分不等式检验"
    doc = """
# 离散变分不等式检验

每个时间层比较不等式两侧的 Monte Carlo 均值，判定
LHS ≤ RHS + 2·stderr + 预算，预算 = svi_budget_scale·(1 + max‖X‖²)·i。
"""
    params_table = """
| 配置项 | 含义 | 默认值 |
|--------|------|--------|
| svi_family | 测试过程族 zero / oracle / frozen | frozen |
| svi_j0 | frozen 族的活跃分量个数 | 4 |
| svi_budget_scale | 容差预算比例 | 1e-6 |
| realizations | 实现次数 M | 1 |
"""

    def execute(self) -> Tuple[Optional[bool], Dict[str, Any]]:
        cfg = self.config
        scenario = build_scenario(cfg)
        names = ["oracle"] if cfg.svi_family == "oracle" else ["oracle", cfg.svi_family]
        families = [make_family(n, scenario.space, scenario.model, cfg.svi_j0, cfg.seed) for n in names]
        results = run_realizations(scenario, cfg.realizations, cfg.seed, SviCollector(families), cfg.workers)

        max_sq = max(res["max_sq_norm"] for res in results)
        times = scenario.params.grid.times()
        rows: List[Dict[str, Any]] = []
        summary: Dict[str, Any] = {"realizations": cfg.realizations, "steps": scenario.params.N, "max_sq_norm": max_sq}
        passed = True
        for name in names:
            lhs = np.vstack([res["terms"][name][0] for res in results])
            rhs = np.vstack([res["terms"][name][1] for res in results])
            report = summarize_svi(lhs, rhs, times, max_sq, name, cfg.svi_budget_scale)
            rows.extend(report_rows(report))
            ok = report.passed
            if name == "oracle":
                # 逐路径成立：每条轨迹都要满足
                budget = cfg.svi_budget_scale * (1.0 + max_sq) * np.arange(1, lhs.shape[1] + 1)
                ok = ok and bool(np.all(lhs <= rhs + budget[None, :]))
            summary[f"{name}_passed"] = ok
            summary[f"{name}_min_margin"] = report.min_margin()
            passed = passed and ok
            logger.info("变分不等式: family=%s, passed=%s, min_margin=%.3e", name, ok, report.min_margin())
        self.export(rows, "svi", "svi.csv")
        return passed, summary
