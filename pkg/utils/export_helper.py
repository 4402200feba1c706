"""
导出辅助函数

提供便捷的导出功能。
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from export_templates import CSVExporter, TemplateManager
from utils.logger import get_logger


logger = get_logger()

_manager: Optional[TemplateManager] = None


def _template_manager() -> TemplateManager:
    global _manager
    if _manager is None:
        _manager = TemplateManager()
    return _manager


def export_to_csv(
    rows: List[Dict[str, Any]],
    template_name: str,
    output_path: str | Path,
    extra_columns: Sequence[str] = (),
    descriptions: Optional[Dict[str, str]] = None,
) -> Path:
    """
    使用指定模板导出报表行到 CSV 文件

    Args:
        rows: 报表行
        template_name: 模板名称（如 step_report、mc_summary）
        output_path: 输出文件路径
        extra_columns: 追加的动态列
        descriptions: 双行标题时的列说明

    Returns:
        写入的文件路径
    """
    template = _template_manager().load_template(template_name)
    path = CSVExporter(template, extra_columns).export(rows, output_path, descriptions)
    logger.debug("导出完成: 模板=%s, 文件=%s", template_name, path)
    return path


def summary_rows(summary: Dict[str, Any]) -> List[Dict[str, Any]]:
    """把摘要字典转换为 summary 模板的键值行（保持插入顺序）。"""
    return [{"key": key, "value": value} for key, value in summary.items()]
