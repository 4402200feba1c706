"""
研究基类

统一的基础类，用于所有研究（去噪实验与各项验收研究）。
每个研究由一份 ExperimentConfig 完整决定，run() 负责日志、输出目录与摘要文件，
具体计算由子类的 execute() 完成。
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import yaml

from core.fespace import State
from core.parser import ExperimentConfig
from core.scheme import Trajectory, trajectory_slack_terms
from utils.export_helper import export_to_csv, summary_rows
from utils.logger import get_logger


logger = get_logger()


@dataclass
class StudyResult:
    """
    研究结果。

    Attributes:
        study: 研究名称。
        passed: 验收判定（没有判定标准的研究为 None）。
        summary: 摘要键值（写入 summary.csv）。
        files: 写出的文件。
    """

    study: str
    passed: Optional[bool]
    summary: Dict[str, Any] = field(default_factory=dict)
    files: List[Path] = field(default_factory=list)


class BaseStudy:
    """
    研究基类。

    文档属性（用于 --list 与用户手册）：
    - name: 英文名称（小写中划线格式，如 "energy-inequality"）
    - chinese_name: 中文名称
    - doc: 详细文档（markdown 格式字符串）
    - params_table: 本研究用到的配置项（markdown 表格）
    """

    name: str = ""
    chinese_name: str = ""
    doc: str = ""
    params_table: str = ""

    def __init__(self, config: ExperimentConfig) -> None:
        self.config = config
        self.out_dir = Path(config.out)
        self._files: List[Path] = []

    # ---- 输出工具方法 --------------------------------------------------
    def path(self, filename: str) -> Path:
        return self.out_dir / filename

    def export(self, rows: List[Dict[str, Any]], template: str, filename: str, **kwargs: Any) -> Path:
        """按模板导出 CSV 并记录文件。"""
        written = export_to_csv(rows, template, self.path(filename), **kwargs)
        self._files.append(written)
        return written

    def record(self, path: Path) -> Path:
        """记录由其他写出函数生成的文件。"""
        self._files.append(Path(path))
        return Path(path)

    def _write_config(self) -> Path:
        path = self.path("config.yaml")
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8") as f:
            yaml.safe_dump(self.config.to_dict(), f, sort_keys=False, allow_unicode=True)
        return path

    # ---- 执行 ----------------------------------------------------------
    def run(self) -> StudyResult:
        """执行研究：写出解析后的配置、调用 execute()、写出摘要。"""
        logger.info("研究开始: %s, out=%s", self.name, self.out_dir)
        self.record(self._write_config())
        try:
            passed, summary = self.execute()
        except Exception:
            logger.error("研究失败: %s", self.name, exc_info=True)
            raise
        summary = {"study": self.name, "passed": passed, **summary}
        self.export(summary_rows(summary), "summary", "summary.csv")
        logger.info("研究结束: %s, passed=%s", self.name, passed)
        return StudyResult(study=self.name, passed=passed, summary=summary, files=list(self._files))

    def execute(self) -> tuple[Optional[bool], Dict[str, Any]]:  # pragma: no cover - 由子类实现
        """
        执行研究的计算部分。

        Returns:
            (passed, summary)
        """
        raise NotImplementedError


def step_report_rows(trajectory: Trajectory, reference: Optional[State] = None) -> List[Dict[str, Any]]:
    """
    轨迹的逐步报告行（step_report 模板）。

    Args:
        reference: 误差参考 g̃_h（解空间中），error = (λ/2)‖X^i - g̃_h‖²；为空时记为 NaN。
    """
    space = trajectory.space
    M = space.mass_matrix
    lam = trajectory.params.lam
    terms = trajectory_slack_terms(trajectory)
    rows: List[Dict[str, Any]] = []
    for report, term in zip(trajectory.reports, terms):
        i = report.index
        x = trajectory.states[i].coefficients
        if reference is None:
            error = float("nan")
        else:
            e = x - reference.coefficients
            error = 0.5 * lam * float(e @ (M @ e))
        rows.append(
            {
                "i": i,
                "t": trajectory.grid.time(i),
                "norm": float(np.sqrt(max(term.sq_norm, 0.0))),
                "j_eps": report.j_eps,
                "fidelity": report.fidelity,
                "error": error,
                "iterations": report.iterations,
                "residual": report.residual,
                "energy_slack": term.slack,
                "sq_norm": term.sq_norm,
                "sq_norm_prev": term.sq_norm_prev,
                "sq_increment": term.sq_increment,
                "j_eps_zero": term.j_eps_zero,
                "noise_pairing": term.noise_pairing,
                "noise_sq": term.noise_sq,
                "tau": term.tau,
            }
        )
    return rows


def error_curve(trajectory: Trajectory, reference: State) -> np.ndarray:
    """t_i ↦ (λ/2)‖X^i - g̃_h‖²，i = 0..N。"""
    M = trajectory.space.mass_matrix
    E = trajectory.coefficient_matrix() - reference.coefficients[None, :]
    return 0.5 * trajectory.params.lam * np.einsum("ij,ij->i", E, (M @ E.T).T)
