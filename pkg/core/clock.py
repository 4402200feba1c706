"""
时间网格

核心设计：
- 维护步数 N 与终止时刻 T（有理数）作为核心状态，τ = T/N 与 t_i = i·T/N 由计算得出
- 这样 N·τ = T 在有理数意义下严格成立，浮点 τ 只在需要时导出
- 配置里写的 τ 会被换算成整数 N，不整除时拒绝
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Union

import numpy as np


# τ 与 T/N 之间允许的相对偏差
TAU_MATCH_TOLERANCE = 1e-9

Number = Union[int, float, Fraction, str]


def as_fraction(value: Number) -> Fraction:
    """把配置中的数值转换为有理数；浮点数按其十进制字面值解释（0.1 -> 1/10）。"""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(repr(value))
    return Fraction(value)


@dataclass(frozen=True)
class TimeGrid:
    """
    均匀时间网格 0 = t_0 < t_1 < ... < t_N = T。

    Attributes:
        horizon: 终止时刻 T（有理数）。
        steps: 步数 N，N = 0 表示只有初值。
    """

    horizon: Fraction
    steps: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "horizon", as_fraction(self.horizon))
        if self.horizon <= 0:
            raise ValueError(f"终止时刻 T 必须为正, got {self.horizon}")
        if int(self.steps) != self.steps or self.steps < 0:
            raise ValueError(f"步数 N 必须是非负整数, got {self.steps}")
        object.__setattr__(self, "steps", int(self.steps))

    @classmethod
    def from_tau(cls, horizon: Number, tau: Number) -> "TimeGrid":
        """
        由 (T, τ) 构造网格。

        Raises:
            ValueError: τ 非正，或 T/τ 不是整数。
        """
        T = as_fraction(horizon)
        tau_f = float(tau)
        if tau_f <= 0.0:
            raise ValueError(f"时间步长 τ 必须为正, got {tau}")
        steps = int(round(float(T) / tau_f))
        if steps < 1 or abs(steps * tau_f - float(T)) > TAU_MATCH_TOLERANCE * float(T):
            raise ValueError(f"T/τ 必须是正整数: T={float(T)}, τ={tau_f}")
        return cls(T, steps)

    @property
    def T(self) -> float:
        return float(self.horizon)

    @property
    def tau_exact(self) -> Fraction:
        if self.steps == 0:
            return Fraction(0)
        return self.horizon / self.steps

    @property
    def tau(self) -> float:
        """时间步长；N = 0 时为 0。"""
        return float(self.tau_exact)

    def time(self, i: int) -> float:
        """第 i 个时间节点 t_i。"""
        if i < 0 or i > self.steps:
            raise IndexError(f"时间下标越界: {i} not in [0, {self.steps}]")
        return float(self.tau_exact * i)

    def times(self) -> np.ndarray:
        return np.array([self.time(i) for i in range(self.steps + 1)])

    def refine(self, factor: int) -> "TimeGrid":
        """步数乘以 factor 的细化网格。"""
        return TimeGrid(self.horizon, self.steps * int(factor))
