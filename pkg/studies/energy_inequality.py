"""
路径能量不等式研究

对 M 条轨迹逐步检验

    ½‖X^i‖² - ½‖X^{i-1}‖² + ¼‖X^i - X^{i-1}‖² + τJ_ε(X^i)
        ≤ τJ_ε(0) + (d, X^{i-1}) + ‖d‖²

判定：每一步的余量 ≥ -budget·(1 + max_i‖X^i‖²)。
零噪声时还检验 J_ε(X^i)（含保真项）随 i 不增。
"""

from __future__ import annotations

from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from core.factory import build_scenario
from core.functionals import j_eps
from core.mc import MEAN, SUP_THEN_MEAN, ObservableCollector, ObservableSpec, mc_summary_rows, run_realizations, summarize_observables
from core.noise import realization_seed
from core.scheme import Trajectory, check_energy_inequality
from data_manager import write_trajectory
from utils.logger import get_logger

from .base import BaseStudy, step_report_rows


logger = get_logger()

SLACK_BUDGET = 1e-6
DECAY_TOLERANCE = 1e-8


# 汇总到 mc_summary.csv 的观测量
OBSERVABLES = (
    ObservableSpec("final_sq_norm", MEAN),
    ObservableSpec("final_j_eps", MEAN),
    ObservableSpec("energy_aggregate", MEAN),
    ObservableSpec("sq_norm_path", SUP_THEN_MEAN),
    ObservableSpec("max_fixed_point_iterations", MEAN),
)


class SlackCollector(ObservableCollector):
    """每次实现：注册观测量，以及逐步余量、max_i‖X^i‖²、J_ε(X^i)（i = 0..N）。"""

    def __init__(self) -> None:
        super().__init__([spec.name for spec in OBSERVABLES])

    def __call__(self, traj: Trajectory) -> Dict[str, Any]:
        X = traj.coefficient_matrix()
        sq = np.einsum("ij,ij->i", X, (traj.space.mass_matrix @ X.T).T)
        p = traj.params
        initial = j_eps(traj.space, traj.states[0], traj.g_h, p.epsilon, p.lam)
        return {
            **super().__call__(traj),
            "slacks": check_energy_inequality(traj),
            "max_sq_norm": float(np.max(sq)),
            "j_eps": np.array([initial] + [r.j_eps for r in traj.reports]),
        }


class EnergyInequalityStudy(BaseStudy):
    """路径能量不等式的 Monte Carlo 检验。"""

    name = "energy-inequality"
    chinese_name = "路径能量不等式"
    doc = """
# 路径能量不等式

逐实现、逐步重新计算能量不等式两端。输出第 0 次实现的逐步报告 steps.csv、
观测量的 Monte Carlo 汇总 mc_summary.csv，摘要中记录全部实现的最小余量。
"""
    params_table = """
| 配置项 | 含义 | 默认值 |
|--------|------|--------|
| realizations | 实现次数 M | 1 |
| workers | 并行进程数 | 1 |
| level / tau | 网格层数与步长 | 6 / 1e-3 |
| dump_trajectory | 写出第 0 次实现的二进制轨迹 | false |
"""

    def execute(self) -> Tuple[Optional[bool], Dict[str, Any]]:
        cfg = self.config
        scenario = build_scenario(cfg)
        results = run_realizations(scenario, cfg.realizations, cfg.seed, SlackCollector(), cfg.workers)

        # 第 0 次实现的逐步报告
        traj0 = scenario.run(realization_seed(cfg.seed, 0))
        self.export(step_report_rows(traj0), "step_report", "steps.csv")
        self.export(mc_summary_rows(summarize_observables(OBSERVABLES, results)), "mc_summary", "mc_summary.csv")
        if cfg.dump_trajectory:
            self.record(write_trajectory(traj0, self.path("trajectory.bin")))

        per_real_min: List[float] = []
        worst_margin = np.inf
        for res in results:
            slacks = res["slacks"]
            budget = SLACK_BUDGET * (1.0 + res["max_sq_norm"])
            m = float(np.min(slacks)) if slacks.size else 0.0
            per_real_min.append(m)
            worst_margin = min(worst_margin, m + budget)
        passed = bool(worst_margin >= 0.0)
        summary: Dict[str, Any] = {
            "realizations": cfg.realizations,
            "steps": scenario.params.N,
            "min_slack": float(np.min(per_real_min)),
            "max_sq_norm": float(max(res["max_sq_norm"] for res in results)),
            "slack_budget": SLACK_BUDGET,
            "worst_margin": float(worst_margin),
        }
        if scenario.model.is_zero:
            decays = [np.diff(res["j_eps"]) for res in results if res["j_eps"].size > 1]
            max_increase = float(max((np.max(d) for d in decays), default=0.0))
            monotone = max_increase <= DECAY_TOLERANCE
            summary["max_energy_increase"] = max_increase
            summary["energy_monotone"] = monotone
            passed = passed and monotone
        logger.info("能量不等式: M=%d, min_slack=%.3e, passed=%s", cfg.realizations, summary["min_slack"], passed)
        return passed, summary
