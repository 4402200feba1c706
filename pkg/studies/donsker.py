"""
随机游走的 Donsker 检验

取 donsker_paths 个独立分量的随机游走 W^j_τ，检验终值 W^j_τ(T)/√T 与标准正态一致：
- Kolmogorov–Smirnov 检验（scipy.stats.kstest）在 ks_alpha 水平下不拒绝；
- 样本方差在 [0.94T, 1.06T] 内。

Rademacher 游走的终值落在间距 2√τ 的格点上，KS 统计量在格点处有跳跃，
因此先加一个格点宽度的均匀抖动（独立子流）；Gaussian 游走不做修正。
"""

from __future__ import annotations

from dataclasses import replace
from typing import Any, Dict, Optional, Tuple

import numpy as np
from scipy import stats

from core.factory import build_noise
from core.noise import ADDITIVE, RADEMACHER, accumulate_walks, jitter_values
from utils.logger import get_logger

from .base import BaseStudy


logger = get_logger()

VARIANCE_BAND = (0.94, 1.06)


class DonskerStudy(BaseStudy):
    """随机游走终值的正态性检验。"""

    name = "donsker"
    chinese_name = "Donsker 检验"
    doc = """
# Donsker 检验

随机游走 W^j_τ(t_i) = Σ_{ℓ≤i} ξ^{ℓ,j}；输出每条路径的终值与归一化值，
以及 KS 统计量、p 值和样本方差。
"""
    params_table = """
| 配置项 | 含义 | 默认值 |
|--------|------|--------|
| donsker_paths | 路径条数 | 2000 |
| ks_alpha | KS 检验显著性水平 | 0.01 |
| noise_kind | rademacher / gaussian | rademacher |
| T / tau | 时间区间与步长 | 0.1 / 1e-3 |
"""

    def execute(self) -> Tuple[Optional[bool], Dict[str, Any]]:
        cfg = self.config
        model = build_noise(cfg)
        if model.is_zero:
            # 游走只依赖增量分布
            model = replace(model, operator=ADDITIVE, sigma=1.0)
            logger.warning("Donsker 检验忽略零噪声设置，使用加性增量")
        grid = cfg.grid
        T, tau, N = grid.T, grid.tau, grid.steps
        paths = accumulate_walks(model, range(cfg.donsker_paths), N, tau)
        terminal = paths[:, -1]
        normalized = terminal / np.sqrt(T)
        if model.kind == RADEMACHER:
            normalized = normalized + jitter_values(cfg.seed, terminal.shape[0]) * 2.0 * np.sqrt(tau) / np.sqrt(T)

        ks = stats.kstest(normalized, "norm")
        variance = float(np.var(terminal, ddof=1))
        low, high = VARIANCE_BAND[0] * T, VARIANCE_BAND[1] * T
        ks_ok = bool(ks.pvalue >= cfg.ks_alpha)
        variance_ok = bool(low <= variance <= high)

        rows = [{"path": j, "terminal": float(terminal[j]), "normalized": float(normalized[j])} for j in range(terminal.shape[0])]
        self.export(rows, "donsker", "donsker.csv")
        logger.info("Donsker 检验: M=%d, N=%d, ks=%.4f, p=%.4f, var/T=%.4f", terminal.shape[0], N, ks.statistic, ks.pvalue, variance / T)
        summary = {
            "paths": int(terminal.shape[0]),
            "steps": N,
            "noise_kind": model.kind,
            "ks_statistic": float(ks.statistic),
            "ks_pvalue": float(ks.pvalue),
            "ks_alpha": cfg.ks_alpha,
            "ks_passed": ks_ok,
            "variance": variance,
            "variance_low": low,
            "variance_high": high,
            "variance_passed": variance_ok,
        }
        return ks_ok and variance_ok, summary
