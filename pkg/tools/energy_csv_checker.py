"""
能量 CSV 校验工具

独立于求解器读取 steps.csv（step_report 模板），只用原始列重新计算每一行的
路径能量不等式余量：

    slack = τJ_ε(0) + noise_pairing + noise_sq
            - (½(sq_norm - sq_norm_prev) + ¼sq_increment + τ·j_eps)

与文件中的 energy_slack 列比对，并列出余量低于容差预算的行。

用法：
    python tools/energy_csv_checker.py output/denoise/steps.csv
"""

from __future__ import annotations

import argparse
import pathlib
import sys
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import pandas as pd

project_root = pathlib.Path(__file__).parent.parent.resolve()
if str(project_root) not in sys.path:
    sys.path.insert(0, str(project_root))

from export_templates import TemplateManager  # noqa: E402
from utils.logger import enable_console, get_logger  # noqa: E402


logger = get_logger()

# 容差预算：-budget·(1 + max sq_norm)
DEFAULT_BUDGET = 1e-6
# 与文件中 energy_slack 列的一致性容差（相对）
CONSISTENCY_TOLERANCE = 1e-9


@dataclass
class CheckReport:
    """
    校验结果。

    Attributes:
        rows: 数据行数。
        min_slack: 重新计算的最小余量。
        threshold: 余量下限 -budget·(1 + max sq_norm)。
        violations: 余量低于下限的步号 i。
        max_mismatch: 重新计算值与 energy_slack 列的最大差（相对）。
    """

    rows: int
    min_slack: float
    threshold: float
    violations: List[int]
    max_mismatch: float

    @property
    def passed(self) -> bool:
        return not self.violations and self.max_mismatch <= CONSISTENCY_TOLERANCE


def load_steps(path: str | pathlib.Path) -> pd.DataFrame:
    """
    读取 step_report CSV，检查列是否齐全。

    Raises:
        ValueError: 缺少模板中的列。
    """
    template = TemplateManager().load_template("step_report")
    df = pd.read_csv(path)
    missing = template.missing_columns(df.columns)
    if missing:
        raise ValueError(f"{path} 缺少列: {missing}")
    return df


def recompute_slack(df: pd.DataFrame) -> pd.Series:
    """只用原始列重新计算每一步的余量。"""
    lhs = 0.5 * (df["sq_norm"] - df["sq_norm_prev"]) + 0.25 * df["sq_increment"] + df["tau"] * df["j_eps"]
    rhs = df["tau"] * df["j_eps_zero"] + df["noise_pairing"] + df["noise_sq"]
    return rhs - lhs


def check_steps(df: pd.DataFrame, budget: float = DEFAULT_BUDGET) -> CheckReport:
    slack = recompute_slack(df)
    if df.empty:
        return CheckReport(rows=0, min_slack=float("nan"), threshold=0.0, violations=[], max_mismatch=0.0)
    scale = 1.0 + float(max(df["sq_norm"].max(), df["sq_norm_prev"].max()))
    threshold = -budget * scale
    violations = [int(i) for i in df.loc[slack < threshold, "i"]]
    reported = pd.to_numeric(df["energy_slack"], errors="coerce")
    mismatch = np.abs(slack - reported) / scale
    return CheckReport(
        rows=int(df.shape[0]),
        min_slack=float(slack.min()),
        threshold=threshold,
        violations=violations,
        max_mismatch=float(mismatch.max()),
    )


def check_file(path: str | pathlib.Path, budget: float = DEFAULT_BUDGET) -> CheckReport:
    report = check_steps(load_steps(path), budget)
    logger.info(
        "能量 CSV 校验: %s, rows=%d, min_slack=%.3e, violations=%d, mismatch=%.3e",
        path,
        report.rows,
        report.min_slack,
        len(report.violations),
        report.max_mismatch,
    )
    return report


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(description="重新计算 steps.csv 中的能量不等式余量")
    parser.add_argument("paths", nargs="+", help="step_report CSV 文件")
    parser.add_argument("--budget", type=float, default=DEFAULT_BUDGET, help="容差预算比例")
    args = parser.parse_args(argv)
    enable_console()

    ok = True
    for path in args.paths:
        report = check_file(path, args.budget)
        status = "OK" if report.passed else "FAIL"
        print(f"[{status}] {path}: rows={report.rows}, min_slack={report.min_slack:.6e}, threshold={report.threshold:.6e}")
        for i in report.violations:
            print(f"    违例: i={i}")
        ok = ok and report.passed
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
