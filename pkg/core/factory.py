"""
对象工厂

负责：
- 根据 ExperimentConfig 构造网格与有限元空间（按 (level, kind) 缓存）
- 构造噪声模型、格式参数、数据（测试图像或场表达式）
- 组装 Monte Carlo 场景，按名称创建研究实例
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Optional

import functions  # noqa: F401  注册场函数

from utils.logger import get_logger

from .clock import TimeGrid
from .expression import parse_field
from .fespace import P1, FeSpace, State, make_space, nodal_interpolate, transfer
from .image import ImageField, make_test_image
from .instance import InstanceRegistry
from .mc import Scenario
from .mesh import build_crisscross
from .noise import MULTIPLICATIVE, NoiseModel
from .parser import ExperimentConfig
from .scheme import SchemeParams


logger = get_logger()


@lru_cache(maxsize=None)
def build_space(level: int, kind: str) -> FeSpace:
    """
    第 level 层交叉网格上的有限元空间；同一 (level, kind) 返回同一对象。
    """
    space = make_space(build_crisscross(level), kind)
    logger.info("有限元空间已构造: %s", space.describe())
    return space


def build_noise(config: ExperimentConfig, sigma: Optional[float] = None) -> NoiseModel:
    """
    由配置构造噪声模型。

    Args:
        sigma: 覆盖配置中的 σ（例如确定性对照 σ=0）。
    """
    model = NoiseModel(
        kind=config.noise_kind,
        operator=config.noise_operator,
        sigma=config.sigma if sigma is None else float(sigma),
        seed=config.seed,
        layout=config.noise_layout,
    )
    if model.operator == MULTIPLICATIVE and not model.is_zero:
        logger.warning("乘性噪声 B(X)=σX 为实验性模式（二维情形不在已证明的理论范围内）")
    return model


def build_params(config: ExperimentConfig, grid: Optional[TimeGrid] = None) -> SchemeParams:
    """由配置构造格式参数；grid 为空时使用 (T, tau) 对应的网格。"""
    return SchemeParams(
        grid=config.grid if grid is None else grid,
        epsilon=config.epsilon,
        lam=config.lam,
        fixed_point_tol=config.fixed_point_tol,
        max_fixed_point_iter=config.max_fixed_point_iter,
        linear_solver=config.linear_solver,
        linear_tol=config.linear_tol,
    )


@dataclass(frozen=True, eq=False)
class ProblemData:
    """
    一次研究的数据。

    Attributes:
        data_space: 数据空间（第 data_level 层 P1）。
        clean: 数据空间中的干净场（初值 x⁰ = g̃_h）。
        noisy: 数据空间中的观测数据 g_h。
        g_h: 搬到解空间中的观测数据。
        clean_h: 搬到解空间中的干净场（误差曲线的参考）。
        image: 测试图像（data=image 时）。
    """

    data_space: FeSpace
    clean: State
    noisy: State
    g_h: State
    clean_h: State
    image: Optional[ImageField] = None


def build_data(config: ExperimentConfig, space: FeSpace) -> ProblemData:
    """
    按配置的数据配方构造数据，并搬到解空间 space 中。
    """
    data_space = build_space(config.data_level, P1)
    image: Optional[ImageField] = None
    if config.data == "image":
        image = make_test_image(config.seed, config.data_level, config.data_noise_amplitude, space=data_space)
        clean, noisy = image.clean, image.noisy
    else:
        clean = nodal_interpolate(data_space, parse_field(config.x0))
        noisy = nodal_interpolate(data_space, parse_field(config.g))
    if space is data_space:
        g_h, clean_h = noisy, clean
    else:
        g_h, clean_h = transfer(noisy, space), transfer(clean, space)
    return ProblemData(data_space=data_space, clean=clean, noisy=noisy, g_h=g_h, clean_h=clean_h, image=image)


def build_scenario(
    config: ExperimentConfig,
    space: Optional[FeSpace] = None,
    sigma: Optional[float] = None,
    grid: Optional[TimeGrid] = None,
    data: Optional[ProblemData] = None,
) -> Scenario:
    """
    组装 Monte Carlo 场景（不含各次实现的种子）。

    Args:
        space: 解空间，默认按 (level, element) 构造。
        sigma: 覆盖噪声强度。
        grid: 覆盖时间网格。
        data: 已构造的数据。
    """
    if space is None:
        space = build_space(config.level, config.element)
    if data is None:
        data = build_data(config, space)
    return Scenario(
        space=space,
        x0=data.clean,
        g_h=data.g_h,
        model=build_noise(config, sigma),
        params=build_params(config, grid),
        quadrature=config.image_quadrature,
    )


class StudyFactory:
    """
    研究工厂。

    根据 config.study 从 InstanceRegistry 中查找研究类并实例化。
    """

    def create_study(self, config: ExperimentConfig) -> Any:
        """
        创建研究实例。

        Raises:
            ValueError: 研究类型未注册。
        """
        study_class = InstanceRegistry.get_study(config.study)
        if study_class is None:
            raise ValueError(f"未知的研究类型: {config.study}。已注册的研究: {InstanceRegistry.list_studies()}")
        return study_class(config)
