"""
研究配置解析器

负责：
- 从 YAML 文件中读取研究配置（例如 config/denoise.yaml）
- 校验版本号、拒绝未知键、补全默认参数
- 合并命令行覆盖项后再次校验

配置是扁平的 key-value 映射，一个文件完整决定一次研究的全部输出。
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace
from typing import Any, Dict, List, Mapping, Optional, Tuple

import pathlib

import yaml

from .clock import TimeGrid
from .fespace import CR, P1
from .linalg import SOLVER_METHODS
from .noise import ABSTRACT_LAYOUT, ADDITIVE, EXPERIMENT_LAYOUT, GAUSSIAN, MULTIPLICATIVE, RADEMACHER, ZERO
from .mesh import MAX_MESH_LEVEL


SCHEMA_VERSION = 1

STUDIES = (
    "denoise",
    "energy-inequality",
    "increment-scaling",
    "svi-check",
    "donsker",
    "projection-stability",
    "energy-moment",
)
DATA_RECIPES = ("image", "expression")
SVI_FAMILIES = ("zero", "oracle", "frozen")

# YAML 键 -> ExperimentConfig 字段名（其余键同名）
_KEY_ALIASES = {"lambda": "lam"}


class ConfigError(ValueError):
    """配置文件或命令行参数错误。"""


@dataclass(frozen=True)
class ExperimentConfig:
    """
    一次研究的完整配置。

    Attributes:
        study: 研究名称（见 STUDIES）。
        T / tau: 时间区间长度与步长，N = T/tau 必须为整数。
        lam / epsilon: 保真项权重 λ 与正则化参数 ε。
        level / element: 求解网格层数与单元类型（p1 / cr）。
        sigma / noise_*: 噪声强度与噪声模型。
        fixed_point_tol / max_fixed_point_iter / linear_solver / linear_tol: 求解器参数。
        data / x0 / g / data_level / data_noise_amplitude / image_quadrature: 数据配方。
        seed / realizations / workers: Monte Carlo 参数。
        out: 输出目录。
        其余字段为各研究的专用参数。
    """

    study: str
    schema_version: int = SCHEMA_VERSION
    T: float = 0.1
    tau: float = 1e-3
    lam: float = 200.0
    epsilon: float = 1e-4
    level: int = 6
    sigma: float = 1.0
    element: str = P1
    noise_kind: str = RADEMACHER
    noise_operator: str = ADDITIVE
    noise_layout: str = EXPERIMENT_LAYOUT
    fixed_point_tol: float = 1e-4
    max_fixed_point_iter: int = 200
    linear_solver: str = "direct"
    linear_tol: float = 1e-10
    data: str = "image"
    x0: Optional[str] = None
    g: Optional[str] = None
    data_level: int = 6
    data_noise_amplitude: float = 0.1
    image_quadrature: int = 7
    seed: int = 0
    realizations: int = 1
    workers: int = 1
    out: str = "output"
    # denoise
    resolution: int = 256
    compare_deterministic: bool = False
    compare_elements: bool = False
    band_sigmas: Tuple[float, ...] = ()
    dump_trajectory: bool = False
    # increment-scaling / energy-moment
    lags: Tuple[int, ...] = (1, 2, 4, 8, 16)
    step_counts: Tuple[int, ...] = (25, 50, 100, 200)
    bootstrap: int = 400
    # svi-check
    svi_family: str = "frozen"
    svi_j0: int = 4
    svi_budget_scale: float = 1e-6
    # projection-stability
    levels: Tuple[int, ...] = (2, 3, 4, 5, 6)
    max_mode: int = 3
    # donsker
    donsker_paths: int = 2000
    ks_alpha: float = 0.01

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid.from_tau(self.T, self.tau)

    @property
    def steps(self) -> int:
        return self.grid.steps

    def to_dict(self) -> Dict[str, Any]:
        """还原为 YAML 键名的字典（用于写入结果目录）。"""
        data = asdict(self)
        data["lambda"] = data.pop("lam")
        for key, value in data.items():
            if isinstance(value, tuple):
                data[key] = list(value)
        return data


_FIELD_TYPES: Dict[str, Any] = {f.name: f.type for f in fields(ExperimentConfig)}


def _yaml_key(name: str) -> str:
    for key, target in _KEY_ALIASES.items():
        if target == name:
            return key
    return name


def _coerce(name: str, value: Any) -> Any:
    """按字段声明的类型转换单个值，失败时抛出 ConfigError。"""
    declared = str(_FIELD_TYPES[name])
    key = _yaml_key(name)
    if declared == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"配置项 {key} 必须是布尔值, got {value!r}")
        return value
    if isinstance(value, bool):
        raise ConfigError(f"配置项 {key} 不能是布尔值, got {value!r}")
    try:
        if declared == "int":
            if isinstance(value, float) and not value.is_integer():
                raise ValueError("not an integer")
            return int(value)
        if declared == "float":
            return float(value)
        if declared == "str":
            return str(value).strip()
        if declared == "Optional[str]":
            return None if value is None else str(value).strip()
        if declared.startswith("Tuple[int"):
            return tuple(int(v) for v in value)
        if declared.startswith("Tuple[float"):
            return tuple(float(v) for v in value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"配置项 {key} 类型错误: {value!r} ({declared})") from exc
    raise ConfigError(f"配置项 {key} 的类型无法识别: {declared}")


def _check_choice(key: str, value: str, choices) -> None:
    if value not in choices:
        raise ConfigError(f"配置项 {key}={value!r} 不合法，可选: {', '.join(choices)}")


def validate(config: ExperimentConfig) -> ExperimentConfig:
    """
    校验配置的取值范围与一致性。

    Returns:
        原配置（study 名规范化后的副本）。

    Raises:
        ConfigError: 任一取值不合法。
    """
    if config.schema_version != SCHEMA_VERSION:
        raise ConfigError(f"不支持的 schema_version: {config.schema_version}（当前为 {SCHEMA_VERSION}）")
    study = config.study.strip().lower().replace("_", "-")
    _check_choice("study", study, STUDIES)
    _check_choice("element", config.element, (P1, CR))
    _check_choice("noise_kind", config.noise_kind, (RADEMACHER, GAUSSIAN))
    _check_choice("noise_operator", config.noise_operator, (ADDITIVE, MULTIPLICATIVE, ZERO))
    _check_choice("noise_layout", config.noise_layout, (EXPERIMENT_LAYOUT, ABSTRACT_LAYOUT))
    _check_choice("linear_solver", config.linear_solver, SOLVER_METHODS)
    _check_choice("data", config.data, DATA_RECIPES)
    _check_choice("svi_family", config.svi_family, SVI_FAMILIES)
    _check_choice("image_quadrature", str(config.image_quadrature), ("3", "7"))

    positive = {
        "T": config.T,
        "tau": config.tau,
        "epsilon": config.epsilon,
        "fixed_point_tol": config.fixed_point_tol,
        "linear_tol": config.linear_tol,
    }
    for key, value in positive.items():
        if not value > 0:
            raise ConfigError(f"配置项 {key} 必须 > 0, got {value}")
    for key, value in {"lambda": config.lam, "sigma": config.sigma, "data_noise_amplitude": config.data_noise_amplitude}.items():
        if value < 0:
            raise ConfigError(f"配置项 {key} 必须 ≥ 0, got {value}")
    for key, value in {
        "level": config.level,
        "data_level": config.data_level,
        **{f"levels[{i}]": lvl for i, lvl in enumerate(config.levels)},
    }.items():
        if not 1 <= value <= MAX_MESH_LEVEL:
            raise ConfigError(f"配置项 {key} 必须在 [1, {MAX_MESH_LEVEL}] 内, got {value}")
    counts = {
        "max_fixed_point_iter": config.max_fixed_point_iter,
        "realizations": config.realizations,
        "workers": config.workers,
        "bootstrap": config.bootstrap,
        "svi_j0": config.svi_j0,
        "max_mode": config.max_mode,
        "donsker_paths": config.donsker_paths,
    }
    for key, value in counts.items():
        if value < 1:
            raise ConfigError(f"配置项 {key} 必须 ≥ 1, got {value}")
    if config.resolution < 16:
        raise ConfigError(f"配置项 resolution 必须 ≥ 16, got {config.resolution}")
    if config.seed < 0:
        raise ConfigError(f"配置项 seed 必须 ≥ 0, got {config.seed}")
    if not config.lags or min(config.lags) < 1:
        raise ConfigError(f"配置项 lags 必须是正整数列表, got {list(config.lags)}")
    if not config.step_counts or min(config.step_counts) < 1:
        raise ConfigError(f"配置项 step_counts 必须是正整数列表, got {list(config.step_counts)}")
    if any(s < 0 for s in config.band_sigmas):
        raise ConfigError(f"配置项 band_sigmas 必须非负, got {list(config.band_sigmas)}")
    if not 0.0 < config.ks_alpha < 1.0:
        raise ConfigError(f"配置项 ks_alpha 必须在 (0, 1) 内, got {config.ks_alpha}")
    if config.svi_budget_scale < 0:
        raise ConfigError(f"配置项 svi_budget_scale 必须 ≥ 0, got {config.svi_budget_scale}")
    if config.data == "expression" and (config.x0 is None or config.g is None):
        raise ConfigError("data=expression 时必须同时给出 x0 与 g")
    try:
        config.grid
    except ValueError as exc:
        raise ConfigError(f"T={config.T} 不是 tau={config.tau} 的整数倍: {exc}") from exc
    return replace(config, study=study)


class ConfigParser:
    """
    研究配置解析器。

    - 只解析一个 YAML 文件，返回 ExperimentConfig。
    - 必须包含 schema_version 与 study，其余键缺省时取默认值。
    - 未知键直接报错（指出键名）。
    """

    def parse_file(self, path: str | pathlib.Path, overrides: Mapping[str, Any] | None = None) -> ExperimentConfig:
        """
        从 YAML 文件解析 ExperimentConfig。

        Args:
            path: 配置文件路径。
            overrides: 命令行覆盖项（YAML 键名），None 值会被忽略。
        """
        path_obj = pathlib.Path(path)
        try:
            with path_obj.open("r", encoding="utf-8") as f:
                data = yaml.safe_load(f) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"配置文件不是合法的 YAML: {path_obj}: {exc}") from exc
        except OSError as exc:
            raise ConfigError(f"无法读取配置文件: {path_obj}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"配置文件顶层必须是映射: {path_obj}")
        if "schema_version" not in data:
            raise ConfigError(f"配置文件缺少 schema_version: {path_obj}")
        config = self.parse_dict(data)
        if overrides:
            config = self.apply_overrides(config, overrides)
        return config

    def parse_dict(self, data: Mapping[str, Any]) -> ExperimentConfig:
        """从字典解析并校验配置。"""
        if "study" not in data:
            raise ConfigError("配置缺少 study")
        return validate(ExperimentConfig(**self._convert(data)))

    def apply_overrides(self, config: ExperimentConfig, overrides: Mapping[str, Any]) -> ExperimentConfig:
        """合并覆盖项（None 表示未指定）后重新校验。"""
        updates = self._convert({k: v for k, v in overrides.items() if v is not None})
        return validate(replace(config, **updates))

    @staticmethod
    def _convert(data: Mapping[str, Any]) -> Dict[str, Any]:
        converted: Dict[str, Any] = {}
        for key, value in data.items():
            name = _KEY_ALIASES.get(str(key), str(key))
            if name not in _FIELD_TYPES:
                raise ConfigError(f"未知的配置项: {key}")
            converted[name] = _coerce(name, value)
        return converted


def known_keys() -> List[str]:
    """返回所有合法的 YAML 键名。"""
    return sorted(_yaml_key(name) for name in _FIELD_TYPES)
