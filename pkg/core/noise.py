"""
离散噪声增量 ξ^{i,j}_τ 与噪声算子 B

随机数采用计数器型生成器（numpy Philox），密钥为 (seed, i)：
ξ^{i,j} 是该子流的第 j 个抽样。因此抽样结果只取决于 (seed, i, j)，
与执行顺序、worker 数量无关，不需要任何共享的生成器状态。

噪声分量与空间的对应：
- experiment 布局：J = 自由度个数，分量 j 作用在第 j 个自由基函数上；
- abstract 布局：J = N，超出自由度个数的分量视为零算子。
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from .fespace import FeSpace, State


RADEMACHER = "rademacher"
GAUSSIAN = "gaussian"
NOISE_KINDS = (RADEMACHER, GAUSSIAN)

ADDITIVE = "additive"
MULTIPLICATIVE = "multiplicative"
ZERO = "zero"
NOISE_OPERATORS = (ADDITIVE, MULTIPLICATIVE, ZERO)

EXPERIMENT_LAYOUT = "experiment"
ABSTRACT_LAYOUT = "abstract"
NOISE_LAYOUTS = (EXPERIMENT_LAYOUT, ABSTRACT_LAYOUT)

_MASK64 = (1 << 64) - 1

# Donsker 检验抖动所用子流的密钥偏移，不与任何时间下标 i 冲突
JITTER_STREAM = 1 << 63
# 合成图像噪声所用子流
DATA_STREAM = JITTER_STREAM + 1


class NoiseDimensionError(ValueError):
    """噪声分量个数与空间或配置不一致。"""


def splitmix64(x: int) -> int:
    """64 位 splitmix 混合函数（双射），用于派生各次实现的种子。"""
    z = (int(x) + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def realization_seed(base_seed: int, realization: int) -> int:
    """第 r 次实现的种子 seed ⊕ splitmix64(r)；对不同 r 两两不同。"""
    return (int(base_seed) & _MASK64) ^ splitmix64(realization)


def substream_key(seed: int, i: int) -> Tuple[int, int]:
    """时间层 i 的子流密钥。"""
    return (int(seed) & _MASK64, int(i) & _MASK64)


def substream(seed: int, i: int) -> np.random.Generator:
    """时间层 i 的独立随机数生成器。"""
    key = np.array(substream_key(seed, i), dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class NoiseModel:
    """
    噪声模型。

    Attributes:
        kind: 增量分布，"rademacher"（±√τ）或 "gaussian"（N(0, τ)）。
        operator: 噪声算子，"additive"（B_j = σφ_j）、
                  "multiplicative"（B_j(X) = σ X_j φ_j，逐系数）或 "zero"。
        sigma: 噪声强度 σ ≥ 0。
        seed: 64 位种子。
        layout: "experiment"（J = 自由度个数）或 "abstract"（J = N）。
    """

    kind: str = RADEMACHER
    operator: str = ADDITIVE
    sigma: float = 1.0
    seed: int = 0
    layout: str = EXPERIMENT_LAYOUT

    def __post_init__(self) -> None:
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"未知的噪声分布: {self.kind}（可选 {', '.join(NOISE_KINDS)}）")
        if self.operator not in NOISE_OPERATORS:
            raise ValueError(f"未知的噪声算子: {self.operator}（可选 {', '.join(NOISE_OPERATORS)}）")
        if self.layout not in NOISE_LAYOUTS:
            raise ValueError(f"未知的噪声布局: {self.layout}（可选 {', '.join(NOISE_LAYOUTS)}）")
        if not np.isfinite(self.sigma) or self.sigma < 0:
            raise ValueError(f"噪声强度 σ 必须是非负有限数, got {self.sigma}")

    @property
    def is_zero(self) -> bool:
        return self.operator == ZERO or self.sigma == 0.0

    def with_seed(self, seed: int) -> "NoiseModel":
        return replace(self, seed=int(seed))

    def with_sigma(self, sigma: float) -> "NoiseModel":
        return replace(self, sigma=float(sigma))

    def num_components(self, space: FeSpace, steps: int) -> int:
        """噪声分量个数 J。"""
        J = space.num_free if self.layout == EXPERIMENT_LAYOUT else int(steps)
        return max(J, 1)


@dataclass(frozen=True, eq=False)
class NoiseIncrement:
    """时间层 i 上的 J 个噪声值 ξ^{i,1..J}。"""

    index: int
    values: np.ndarray

    @property
    def J(self) -> int:
        return int(self.values.shape[0])


def draw_values(model: NoiseModel, i: int, tau: float, J: int) -> np.ndarray:
    """时间层 i 的前 J 个抽样，方差为 τ。前缀稳定：J 变大时前面的值不变。"""
    if tau <= 0:
        raise ValueError(f"时间步长 τ 必须为正, got {tau}")
    if J < 1:
        raise NoiseDimensionError(f"噪声分量个数必须 ≥ 1, got {J}")
    if model.operator == ZERO:
        return np.zeros(J)
    gen = substream(model.seed, i)
    scale = np.sqrt(tau)
    if model.kind == RADEMACHER:
        return np.where(gen.random(J) < 0.5, -scale, scale)
    return scale * gen.standard_normal(J)


def draw_increment(model: NoiseModel, i: int, tau: float, J: int) -> NoiseIncrement:
    """
    抽取第 i 层的噪声增量。

    Args:
        model: 噪声模型。
        i: 时间下标，i ≥ 1。
        tau: 时间步长 τ > 0。
        J: 分量个数。
    """
    if i < 1:
        raise ValueError(f"时间下标必须 ≥ 1, got {i}")
    return NoiseIncrement(int(i), draw_values(model, i, tau, J))


def _expected_components(model: NoiseModel, space: FeSpace, J: int) -> None:
    if model.layout == EXPERIMENT_LAYOUT and model.operator != ZERO and J != space.num_free:
        raise NoiseDimensionError(f"experiment 布局要求 J = 自由度个数 {space.num_free}, got {J}")


def b_matrix(model: NoiseModel, space: FeSpace, prev_state: State, J: int) -> sp.csr_matrix:
    """
    P_h B_j(X^{i-1}) 的系数矩阵，shape (ndof, J)，第 j 列为第 j 个分量。

    Raises:
        NoiseDimensionError: J 与布局不一致，或状态不属于该空间。
    """
    if prev_state.coefficients.shape[0] != space.dof_count:
        raise NoiseDimensionError("噪声算子的状态维度与空间不一致")
    _expected_components(model, space, J)
    if model.is_zero:
        return sp.csr_matrix((space.dof_count, J))
    active = min(J, space.num_free)
    rows = space.free_dofs[:active]
    cols = np.arange(active)
    if model.operator == ADDITIVE:
        data = np.full(active, model.sigma)
    else:
        data = model.sigma * prev_state.coefficients[rows]
    return sp.csr_matrix((data, (rows, cols)), shape=(space.dof_count, J))


def noise_field(model: NoiseModel, space: FeSpace, prev_state: State, inc: NoiseIncrement) -> np.ndarray:
    """噪声场 Σ_j P_h B_j(X^{i-1}) ξ^{i,j} 的系数。"""
    return b_matrix(model, space, prev_state, inc.J) @ inc.values


def apply_B(model: NoiseModel, space: FeSpace, prev_state: State, inc: NoiseIncrement) -> np.ndarray:
    """
    噪声载荷向量：(Σ_j B_j(X^{i-1}) ξ^{i,j}, φ_a)，受约束行置 0。

    Raises:
        NoiseDimensionError: 维度不匹配。
    """
    load = space.mass_matrix @ noise_field(model, space, prev_state, inc)
    load[space.constrained] = 0.0
    return load


@dataclass(frozen=True, eq=False)
class RandomWalk:
    """
    分段线性随机游走 W^j_τ，W(t_i) = Σ_{ℓ≤i} ξ^{ℓ,j}。
    """

    times: np.ndarray
    values: np.ndarray

    def at(self, t: float | np.ndarray) -> float | np.ndarray:
        return np.interp(t, self.times, self.values)

    @property
    def terminal(self) -> float:
        return float(self.values[-1])


def accumulate_walks(model: NoiseModel, components: Sequence[int], steps: int, tau: float) -> np.ndarray:
    """
    同时累加多个分量的随机游走。

    Returns:
        shape (len(components), steps + 1) 的节点值，第一列为 0。
    """
    comps = np.asarray(components, dtype=np.int64)
    paths = np.zeros((comps.shape[0], steps + 1))
    if model.operator == ZERO or comps.size == 0 or steps == 0:
        return paths
    width = int(comps.max()) + 1
    for i in range(1, steps + 1):
        paths[:, i] = paths[:, i - 1] + draw_values(model, i, tau, width)[comps]
    return paths


def accumulate_walk(model: NoiseModel, j: int, steps: int, tau: float) -> RandomWalk:
    """第 j 个分量（从 0 开始）的随机游走。"""
    values = accumulate_walks(model, [j], steps, tau)[0]
    return RandomWalk(times=tau * np.arange(steps + 1), values=values)


def jitter_values(seed: int, size: int) -> np.ndarray:
    """Donsker 检验的连续性修正抖动，U(-1/2, 1/2)，来自独立子流。"""
    return substream(seed, JITTER_STREAM).random(size) - 0.5


def increments_matrix(increments: Sequence[NoiseIncrement]) -> np.ndarray:
    """把增量序列堆叠为 shape (N, J) 的矩阵。"""
    if not increments:
        return np.zeros((0, 0))
    return np.vstack([inc.values for inc in increments])
