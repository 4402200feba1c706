"""
文档获取辅助模块

提供统一的接口，从 studies 和 functions 获取研究与场函数的文档信息，
供命令行 --list 与用户手册使用，避免在多处硬编码。
"""

from dataclasses import asdict, dataclass
from typing import Dict, List, Optional

from core.instance import InstanceRegistry


@dataclass
class StudyDocInfo:
    """研究文档信息"""

    name: str
    chinese_name: str
    doc: str
    params_table: str

    def to_dict(self) -> Dict[str, str]:
        return asdict(self)


class DocHelper:
    """
    文档获取辅助类
    """

    @staticmethod
    def get_study_list() -> List[str]:
        """获取所有已注册的研究名称列表。"""
        return InstanceRegistry.list_studies()

    @staticmethod
    def get_study_doc(name: str) -> Optional[StudyDocInfo]:
        """
        获取研究的文档信息。

        Args:
            name: 研究名称（不区分大小写）

        Returns:
            StudyDocInfo，如果研究不存在则返回 None
        """
        study_class = InstanceRegistry.get_study(name)
        if study_class is None:
            return None
        return StudyDocInfo(
            name=getattr(study_class, "name", name),
            chinese_name=getattr(study_class, "chinese_name", name),
            doc=getattr(study_class, "doc", ""),
            params_table=getattr(study_class, "params_table", ""),
        )

    @staticmethod
    def get_function_list() -> List[str]:
        """获取所有已注册的场函数名称列表。"""
        return InstanceRegistry.list_functions()

    @staticmethod
    def format_study_list() -> str:
        """命令行展示用的研究列表（每行：名称  中文名）。"""
        lines = []
        for name in DocHelper.get_study_list():
            info = DocHelper.get_study_doc(name)
            lines.append(f"{name:<22}{info.chinese_name if info else ''}")
        return "\n".join(lines)
