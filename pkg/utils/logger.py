"""
日志模块（stvf）

多等级文件日志 + 控制台输出：
- 文件按等级拆分（debug/info/warning/error），便于长时间 Monte Carlo 运行后排查。
- 控制台只输出 INFO 及以上，用于命令行查看研究进度。
"""

from __future__ import annotations

import logging
import os
import sys
from logging.handlers import RotatingFileHandler

# 单个日志文件上限与保留份数
LOG_MAX_BYTES = 10 * 1024 * 1024
LOG_BACKUP_COUNT = 5

_LEVEL_FORMATS = {
    "debug": (logging.DEBUG, "%(asctime)s - %(name)s - %(levelname)s - %(filename)s:%(lineno)d - %(message)s"),
    "info": (logging.INFO, "%(asctime)s - %(levelname)s - %(message)s"),
    "warning": (logging.WARNING, "%(asctime)s - %(levelname)s - %(message)s"),
    "error": (logging.ERROR, "%(asctime)s - %(levelname)s - %(filename)s:%(lineno)d - %(message)s"),
}


class SafeRotatingFileHandler(RotatingFileHandler):
    """
    轮转失败时不抛异常的文件处理器。

    多个进程（Monte Carlo worker）同时写同一目录时，轮转可能因文件占用失败，
    此时继续写当前文件。
    """

    def doRollover(self) -> None:
        try:
            super().doRollover()
        except (PermissionError, OSError):
            pass


class Logger:
    """
    日志管理器。

    - 按等级输出到不同日志文件。
    - 可选控制台输出（命令行入口打开）。
    """

    def __init__(self, log_dir: str = "logs", name: str = "stvf", console: bool = False) -> None:
        """
        Args:
            log_dir: 日志输出目录。
            name: logger 名称，同时作为日志文件前缀。
            console: 是否同时输出到 stderr。
        """
        self.log_dir = log_dir
        self.name = name

        os.makedirs(log_dir, exist_ok=True)

        self.logger = logging.getLogger(name)
        self.logger.setLevel(logging.DEBUG)
        self.logger.propagate = False

        # 避免重复添加 handler
        if not self.logger.handlers:
            self._setup_file_handlers()
            if console:
                self._setup_console_handler()

    def _setup_file_handlers(self) -> None:
        """为每个等级建立一个轮转文件。"""
        for suffix, (level, fmt) in _LEVEL_FORMATS.items():
            handler = SafeRotatingFileHandler(
                os.path.join(self.log_dir, f"{self.name}_{suffix}.log"),
                maxBytes=LOG_MAX_BYTES,
                backupCount=LOG_BACKUP_COUNT,
                encoding="utf-8",
            )
            handler.setLevel(level)
            handler.setFormatter(logging.Formatter(fmt))
            self.logger.addHandler(handler)

    def _setup_console_handler(self) -> None:
        attach_console(self.logger, logging.INFO)

    def get_logger(self) -> logging.Logger:
        """获取底层 logger 实例。"""
        return self.logger

    def close(self) -> None:
        """刷新并关闭所有 handler，进程退出前调用。"""
        for handler in list(self.logger.handlers):
            try:
                handler.flush()
                handler.close()
            except Exception:
                pass
            self.logger.removeHandler(handler)


_LOGGER_INSTANCE: Logger | None = None


def get_logger(log_dir: str = "logs", name: str = "stvf", console: bool = False) -> logging.Logger:
    """
    获取全局 logger 实例（单例）。

    第一次调用决定日志目录；之后的调用参数被忽略。
    """
    global _LOGGER_INSTANCE
    if _LOGGER_INSTANCE is None:
        _LOGGER_INSTANCE = Logger(log_dir, name, console)
    return _LOGGER_INSTANCE.get_logger()


def close_logger() -> None:
    """关闭全局 logger 实例。"""
    global _LOGGER_INSTANCE
    if _LOGGER_INSTANCE is not None:
        _LOGGER_INSTANCE.close()
        _LOGGER_INSTANCE = None


def attach_console(logger: logging.Logger, level: int) -> logging.Handler:
    """给 logger 挂一个 stderr handler；已存在时只调整等级。"""
    for handler in logger.handlers:
        if isinstance(handler, logging.StreamHandler) and not isinstance(handler, logging.FileHandler):
            handler.setLevel(level)
            return handler
    handler = logging.StreamHandler(sys.stderr)
    handler.setLevel(level)
    handler.setFormatter(logging.Formatter("%(asctime)s - %(levelname)s - %(message)s"))
    logger.addHandler(handler)
    return handler


def enable_console(level: int = logging.INFO) -> None:
    """
    为全局 logger 追加控制台输出（命令行入口调用）。

    各模块在导入时已经创建了 logger，这里只补一个 handler，重复调用无副作用。
    """
    attach_console(get_logger(), level)
