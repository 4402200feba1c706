"""
研究执行引擎

统一的调度入口：
- 从 YAML 文件或字典得到 ExperimentConfig（命令行覆盖项在解析后合并、再次校验）
- 通过 StudyFactory 创建研究实例
- 执行研究并返回 StudyResult
"""

from __future__ import annotations

import time
from pathlib import Path
from typing import Any, Dict, Mapping

import studies  # noqa: F401  注册研究

from studies.base import StudyResult
from utils.logger import get_logger

from .factory import StudyFactory, build_space
from .parser import ConfigParser, ExperimentConfig


logger = get_logger()


class StudyEngine:
    """
    研究执行引擎。

    示例：
        engine = StudyEngine.from_file("config/denoise.yaml", overrides={"seed": 3})
        result = engine.run()
        print(result.passed, result.files)
    """

    def __init__(self, config: ExperimentConfig) -> None:
        self.config = config
        self._factory = StudyFactory()
        logger.info(
            "StudyEngine initialized: study=%s, element=%s, level=%d, out=%s",
            config.study,
            config.element,
            config.level,
            config.out,
        )

    @classmethod
    def from_file(cls, path: str | Path, overrides: Mapping[str, Any] | None = None) -> "StudyEngine":
        """从 YAML 文件创建引擎。"""
        return cls(ConfigParser().parse_file(path, overrides))

    @classmethod
    def from_dict(cls, data: Dict[str, Any], overrides: Mapping[str, Any] | None = None) -> "StudyEngine":
        """从字典创建引擎（测试与脚本使用）。"""
        parser = ConfigParser()
        config = parser.parse_dict(data)
        if overrides:
            config = parser.apply_overrides(config, overrides)
        return cls(config)

    def run(self) -> StudyResult:
        """
        执行研究。

        Raises:
            任何研究内部错误（已记录日志）都会原样抛出。
        """
        study = self._factory.create_study(self.config)
        start = time.perf_counter()
        result = study.run()
        elapsed = time.perf_counter() - start
        info = build_space.cache_info()
        logger.info(
            "研究 %s 完成: passed=%s, 文件数=%d, 耗时=%.2fs, 空间缓存命中=%d/%d",
            result.study,
            result.passed,
            len(result.files),
            elapsed,
            info.hits,
            info.hits + info.misses,
        )
        return result
