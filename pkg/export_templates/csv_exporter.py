"""
CSV 导出器

负责将报表行（字典列表）按模板导出为 CSV 格式。
"""

from __future__ import annotations

import csv
import math
from numbers import Integral, Real
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from utils.logger import get_logger

from .template_manager import ExportTemplate


logger = get_logger()


class CSVExporter:
    """
    CSV 导出器

    - 列 = 模板固定列 + 调用方追加的动态列（extra_columns）
    - 浮点数按模板格式（默认 17 位有效数字）输出，保证同一输入逐字节相同
    - 支持单行标题和双行标题（第二行为列说明）
    """

    def __init__(self, template: ExportTemplate, extra_columns: Sequence[str] = ()) -> None:
        """
        初始化 CSV 导出器

        Args:
            template: 导出模板配置
            extra_columns: 追加在固定列之后的列（例如各 σ 的误差曲线）
        """
        self.template = template
        self.columns: List[str] = list(template.columns) + [c for c in extra_columns if c not in template.columns]
        if not self.columns:
            raise ValueError(f"模板 {template.name} 没有任何列")

    def format_value(self, value: Any) -> str:
        """把单个值格式化为字符串。"""
        if value is None:
            return ""
        if isinstance(value, bool):
            return "true" if value else "false"
        if isinstance(value, Integral):
            return str(int(value))
        if isinstance(value, Real):
            v = float(value)
            if math.isnan(v):
                return "nan"
            if math.isinf(v):
                return "inf" if v > 0 else "-inf"
            return format(v, self.template.float_format)
        return str(value)

    def export(
        self,
        rows: List[Dict[str, Any]],
        output_path: str | Path,
        descriptions: Optional[Dict[str, str]] = None,
    ) -> Path:
        """
        导出报表行到 CSV 文件

        Args:
            rows: 报表行，每行必须包含全部列
            output_path: 输出文件路径
            descriptions: 双行标题时第二行的列说明（缺省为列名）

        Raises:
            ValueError: 某行缺少列
        """
        output_path = Path(output_path)
        output_path.parent.mkdir(parents=True, exist_ok=True)

        for k, row in enumerate(rows):
            missing = [c for c in self.columns if c not in row]
            if missing:
                raise ValueError(f"第 {k} 行缺少列: {missing}（模板 {self.template.name}）")

        try:
            with output_path.open("w", newline="", encoding="utf-8") as f:
                writer = csv.writer(f, lineterminator="\n")
                writer.writerow(self.columns)
                if self.template.header_rows == 2:
                    descriptions = descriptions or {}
                    writer.writerow([descriptions.get(c, c) for c in self.columns])
                for row in rows:
                    writer.writerow([self.format_value(row[c]) for c in self.columns])
        except OSError as e:
            logger.error("CSV 导出失败: 文件=%s, 错误=%s", output_path, e, exc_info=True)
            raise

        logger.info(
            "CSV 导出成功: 文件=%s, 行数=%d, 列数=%d",
            output_path,
            len(rows) + self.template.header_rows,
            len(self.columns),
        )
        return output_path
