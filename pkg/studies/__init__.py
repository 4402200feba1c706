"""
研究库

包含去噪实验与各项验收研究：
- denoise: 图像去噪实验
- energy-inequality: 路径能量不等式
- increment-scaling: 时间增量标度
- svi-check: 离散变分不等式检验
- donsker: 随机游走的 Donsker 检验
- projection-stability: 投影稳定性
- energy-moment: 能量聚合量的二阶矩
"""

from .base import BaseStudy, StudyResult
from .denoise import DenoiseStudy
from .donsker import DonskerStudy
from .energy_inequality import EnergyInequalityStudy
from .energy_moment import EnergyMomentStudy
from .increment_scaling import IncrementScalingStudy
from .projection_stability import ProjectionStabilityStudy
from .svi_check import SviCheckStudy

# 自动注册研究
from core.instance import InstanceRegistry

for _study in (
    DenoiseStudy,
    EnergyInequalityStudy,
    IncrementScalingStudy,
    SviCheckStudy,
    DonskerStudy,
    ProjectionStabilityStudy,
    EnergyMomentStudy,
):
    InstanceRegistry.register_study(_study.name, _study)

__all__ = [
    "BaseStudy",
    "StudyResult",
    "DenoiseStudy",
    "EnergyInequalityStudy",
    "IncrementScalingStudy",
    "SviCheckStudy",
    "DonskerStudy",
    "ProjectionStabilityStudy",
    "EnergyMomentStudy",
]
