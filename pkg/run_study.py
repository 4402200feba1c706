"""
研究命令行入口

用法：
    python run_study.py denoise --config config/denoise.yaml --element cr
    python run_study.py energy-inequality --realizations 16 --workers 4
    python run_study.py list

不给 --config 时使用全部默认参数。命令行覆盖项在解析配置文件之后合并并重新校验。
退出码：0 = 通过（或该研究没有判定标准），1 = 未通过，2 = 配置错误。
"""

from __future__ import annotations

import argparse
import pathlib
import sys
from typing import Any, Dict, List, Optional

# 将项目根目录添加到 Python 路径
project_root = pathlib.Path(__file__).parent.resolve()
if str(project_root) not in sys.path:
    sys.path.insert(0, str(project_root))

from core.engine import StudyEngine  # noqa: E402
from core.fespace import ELEMENT_KINDS  # noqa: E402
from core.parser import SCHEMA_VERSION, STUDIES, ConfigError  # noqa: E402
from utils.doc_helper import DocHelper  # noqa: E402
from utils.logger import enable_console, get_logger  # noqa: E402


logger = get_logger()

EXIT_PASSED = 0
EXIT_FAILED = 1
EXIT_CONFIG_ERROR = 2


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=str, default=None, help="YAML 配置文件")
    parser.add_argument("--seed", type=int, default=None, help="64 位种子")
    parser.add_argument("--out", type=str, default=None, help="输出目录")
    parser.add_argument("--element", choices=ELEMENT_KINDS, default=None, help="单元类型")
    parser.add_argument("--level", type=int, default=None, help="网格层数（h = 2^-level）")
    parser.add_argument("--tau", type=float, default=None, help="时间步长")
    parser.add_argument("--sigma", type=float, default=None, help="噪声强度")
    parser.add_argument("--realizations", type=int, default=None, help="Monte Carlo 实现次数")
    parser.add_argument("--workers", type=int, default=None, help="并行进程数")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="随机全变差流的有限元求解与研究工具")
    sub = parser.add_subparsers(dest="study", required=True)
    sub.add_parser("list", help="列出所有研究")
    for name in STUDIES:
        _add_common_flags(sub.add_parser(name, help=f"运行 {name} 研究"))
    return parser


def overrides_of(args: argparse.Namespace) -> Dict[str, Any]:
    """命令行覆盖项（YAML 键名），未给出的为 None。"""
    return {
        "seed": args.seed,
        "out": args.out,
        "element": args.element,
        "level": args.level,
        "tau": args.tau,
        "sigma": args.sigma,
        "realizations": args.realizations,
        "workers": args.workers,
    }


def make_engine(args: argparse.Namespace) -> StudyEngine:
    overrides = overrides_of(args)
    if args.config is None:
        return StudyEngine.from_dict({"schema_version": SCHEMA_VERSION, "study": args.study}, overrides)
    engine = StudyEngine.from_file(args.config, overrides)
    if engine.config.study != args.study:
        raise ConfigError(f"配置文件中的 study={engine.config.study} 与子命令 {args.study} 不一致")
    return engine


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.study == "list":
        print(DocHelper.format_study_list())
        return EXIT_PASSED

    enable_console()
    try:
        engine = make_engine(args)
    except ConfigError as exc:
        logger.error("配置错误: %s", exc)
        return EXIT_CONFIG_ERROR
    result = engine.run()
    for path in result.files:
        print(path)
    return EXIT_FAILED if result.passed is False else EXIT_PASSED


if __name__ == "__main__":
    sys.exit(main())
