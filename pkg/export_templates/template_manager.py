"""
导出模板管理器

templates/ 下每个 YAML 文件描述一种报表 CSV：固定列、标题行数、浮点格式。
研究、能量校验工具与测试都通过同一份模板读写，列名只在 YAML 中维护一处。
"""

from __future__ import annotations

import pathlib
from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Optional, Tuple

import yaml

from utils.logger import get_logger


logger = get_logger()

TEMPLATES_DIR = pathlib.Path(__file__).parent / "templates"

# 17 位有效数字，double 可无损往返
DEFAULT_FLOAT_FORMAT = ".17g"


@dataclass(frozen=True)
class ExportTemplate:
    """
    一种报表的列布局。

    Attributes:
        name: 报表名称（与文件名相同，如 step_report）。
        columns: 固定列，顺序即输出顺序。
        header_rows: 1 或 2；为 2 时第二行是列说明（如 curve 中各列对应的 σ）。
        float_format: 浮点数的 format 规范。
    """

    name: str
    columns: Tuple[str, ...] = ()
    header_rows: int = 1
    float_format: str = DEFAULT_FLOAT_FORMAT

    def __post_init__(self) -> None:
        if self.header_rows not in (1, 2):
            raise ValueError(f"模板 {self.name}: header_rows 只能是 1 或 2, got {self.header_rows}")
        if len(set(self.columns)) != len(self.columns):
            raise ValueError(f"模板 {self.name} 的列名重复: {list(self.columns)}")
        format(0.1, self.float_format)

    def missing_columns(self, present: Iterable[str]) -> List[str]:
        """固定列中不在 present 里的列（保持模板顺序）。"""
        present = set(present)
        return [c for c in self.columns if c not in present]


def _template_from_yaml(name: str, data: Dict[str, Any]) -> ExportTemplate:
    declared = data.get("name", name)
    if declared != name:
        logger.warning("模板文件名与 name 字段不一致: file=%s, name=%s", name, declared)
    return ExportTemplate(
        name=name,
        columns=tuple(str(c) for c in data.get("columns") or ()),
        header_rows=int(data.get("header_rows", 1)),
        float_format=str(data.get("float_format", DEFAULT_FLOAT_FORMAT)),
    )


class TemplateManager:
    """
    模板管理器：按名称加载报表模板并缓存。
    """

    def __init__(self, templates_dir: Optional[pathlib.Path] = None) -> None:
        self.templates_dir = pathlib.Path(templates_dir) if templates_dir else TEMPLATES_DIR
        self._templates: Dict[str, ExportTemplate] = {}

    def load_template(self, name: str) -> ExportTemplate:
        """
        加载报表模板。

        Raises:
            FileNotFoundError: 模板文件不存在。
            ValueError: YAML 内容不是合法的模板。
        """
        cached = self._templates.get(name)
        if cached is not None:
            return cached

        path = self.templates_dir / f"{name}.yaml"
        if not path.exists():
            raise FileNotFoundError(f"报表模板不存在: {path}（可用: {', '.join(self.list_templates())}）")
        try:
            data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
            if not isinstance(data, dict):
                raise ValueError("顶层必须是映射")
            template = _template_from_yaml(name, data)
        except (yaml.YAMLError, ValueError, TypeError) as e:
            logger.error("报表模板无效: name=%s, error=%s", name, e, exc_info=True)
            raise ValueError(f"报表模板 {name} 无效: {e}") from e

        self._templates[name] = template
        logger.debug("报表模板已加载: %s（%d 列）", name, len(template.columns))
        return template

    def list_templates(self) -> List[str]:
        """templates 目录下的全部报表名称。"""
        if not self.templates_dir.exists():
            return []
        return sorted(p.stem for p in self.templates_dir.glob("*.yaml"))
