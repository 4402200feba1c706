"""
命令行入口测试：list、退出码、配置覆盖
"""

import logging
import pathlib
import sys

# 添加项目根目录到路径
project_root = pathlib.Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from core.parser import STUDIES
from run_study import EXIT_CONFIG_ERROR, EXIT_PASSED, build_parser, main, overrides_of
from utils.doc_helper import DocHelper
from utils.logger import attach_console, enable_console, get_logger


def test_list_command(capsys):
    assert main(["list"]) == EXIT_PASSED
    out = capsys.readouterr().out
    for name in STUDIES:
        assert name in out
    print("[OK] list 列出全部研究")


def test_doc_helper():
    info = DocHelper.get_study_doc("donsker")
    assert info is not None
    assert info.name == "donsker"
    assert "ks_alpha" in info.params_table
    assert DocHelper.get_study_doc("nope") is None
    functions = DocHelper.get_function_list()
    assert "indicator_box" in functions and "sin" in functions


def test_overrides_only_given_flags():
    args = build_parser().parse_args(["denoise", "--seed", "5", "--element", "cr"])
    overrides = overrides_of(args)
    assert overrides["seed"] == 5
    assert overrides["element"] == "cr"
    assert overrides["tau"] is None


def test_config_error_exit_code(tmp_path):
    assert main(["denoise", "--tau", "0.03", "--out", str(tmp_path)]) == EXIT_CONFIG_ERROR
    assert main(["denoise", "--config", str(tmp_path / "missing.yaml")]) == EXIT_CONFIG_ERROR


def test_study_mismatch_is_config_error(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("schema_version: 1\nstudy: donsker\n", encoding="utf-8")
    assert main(["denoise", "--config", str(path)]) == EXIT_CONFIG_ERROR


def test_run_from_config(tmp_path, capsys):
    path = tmp_path / "run.yaml"
    path.write_text("schema_version: 1\nstudy: projection-stability\nlevels: [2, 3]\nmax_mode: 2\n", encoding="utf-8")
    out = tmp_path / "out"
    assert main(["projection-stability", "--config", str(path), "--out", str(out)]) == EXIT_PASSED
    assert (out / "projection.csv").exists()
    assert "projection.csv" in capsys.readouterr().out


def _console_handlers(logger):
    return [h for h in logger.handlers if isinstance(h, logging.StreamHandler) and not isinstance(h, logging.FileHandler)]


def test_enable_console_is_idempotent():
    """重复调用只保留一个控制台 handler，等级取最后一次。"""
    enable_console()
    enable_console(logging.DEBUG)
    handlers = _console_handlers(get_logger())
    assert len(handlers) == 1
    assert handlers[0].level == logging.DEBUG
    enable_console()
    assert len(_console_handlers(get_logger())) == 1

    other = logging.getLogger("stvf_console_check")
    first = attach_console(other, logging.INFO)
    assert attach_console(other, logging.WARNING) is first
    assert len(_console_handlers(other)) == 1
    other.removeHandler(first)



if __name__ == "__main__":
    test_doc_helper()
