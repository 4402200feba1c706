"""
全离散隐式格式

每个时间步求解非线性方程

    (X^i - X^{i-1}, v) + τ(∇X^i/√(|∇X^i|²+ε²), ∇v) + τλ(X^i - g, v) = Σ_j (B_j(X^{i-1}), v) ξ^{i,j}

采用 lagged diffusivity（Kačanov）不动点迭代：冻结单元权重 w_T = 1/√(|∇Y^k|²+ε²)，
每次迭代解一个对称正定线性系统，以质量加权 L² 范数的更新量作为停止判据。
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import List, Tuple, Union

import numpy as np

from utils.logger import get_logger

from .clock import TimeGrid
from .fespace import (
    FeSpace,
    ScalarField,
    State,
    apply_dirichlet,
    assemble_weighted_stiffness,
    element_gradients,
    l2_project,
)
from .functionals import j_eps, j_eps_zero
from .linalg import SOLVER_METHODS, LinearSolveFailure, solve_spd
from .noise import NoiseIncrement, NoiseModel, apply_B, draw_increment, increments_matrix, noise_field


logger = get_logger()


class FixedPointDivergence(RuntimeError):
    """不动点迭代在最大迭代次数内未达到容差。"""

    def __init__(self, index: int, iterations: int, residual: float) -> None:
        super().__init__(f"第 {index} 步不动点迭代未收敛: iterations={iterations}, residual={residual:.3e}")
        self.index = index
        self.iterations = iterations
        self.residual = residual


class TrajectoryError(RuntimeError):
    """轨迹积分在某一步失败，index 为失败的时间下标。"""

    def __init__(self, index: int, cause: Exception) -> None:
        super().__init__(f"轨迹在第 {index} 步失败: {cause}")
        self.index = index
        self.cause = cause


@dataclass(frozen=True)
class SchemeParams:
    """
    格式参数。

    Attributes:
        grid: 时间网格（T 与 N，τ = T/N）。
        epsilon: 正则化参数 ε > 0。
        lam: 保真项权重 λ ≥ 0。
        fixed_point_tol: 不动点容差（质量加权 L² 范数）。
        max_fixed_point_iter: 最大不动点迭代次数。
        linear_solver: 内层线性求解方式，"direct" 或 "cg"。
        linear_tol: 内层 cg 相对残差容差。
    """

    grid: TimeGrid
    epsilon: float = 1e-4
    lam: float = 200.0
    fixed_point_tol: float = 1e-4
    max_fixed_point_iter: int = 200
    linear_solver: str = "direct"
    linear_tol: float = 1e-10

    def __post_init__(self) -> None:
        if not self.epsilon > 0:
            raise ValueError(f"ε 必须为正, got {self.epsilon}")
        if not self.lam >= 0:
            raise ValueError(f"λ 必须非负, got {self.lam}")
        if not self.fixed_point_tol > 0:
            raise ValueError(f"不动点容差必须为正, got {self.fixed_point_tol}")
        if self.max_fixed_point_iter < 1:
            raise ValueError(f"最大不动点迭代次数必须 ≥ 1, got {self.max_fixed_point_iter}")
        if self.linear_solver not in SOLVER_METHODS:
            raise ValueError(f"未知的线性求解方式: {self.linear_solver}")

    @property
    def tau(self) -> float:
        return self.grid.tau

    @property
    def T(self) -> float:
        return self.grid.T

    @property
    def N(self) -> int:
        return self.grid.steps

    def tightened(self, factor: float = 10.0) -> "SchemeParams":
        """容差缩小 factor 倍、迭代上限加倍的参数（求解器一致性检查用）。"""
        return replace(
            self,
            fixed_point_tol=self.fixed_point_tol / factor,
            max_fixed_point_iter=2 * self.max_fixed_point_iter,
        )


@dataclass(frozen=True)
class StepReport:
    """单步报告：不动点迭代次数、最终残差、能量不等式余量以及步末能量。"""

    index: int
    iterations: int
    residual: float
    energy_slack: float
    j_eps: float
    fidelity: float


@dataclass(eq=False)
class Trajectory:
    """
    完整轨迹 X⁰..X^N 与所用噪声增量。

    Attributes:
        space: 有限元空间。
        params: 格式参数。
        model: 噪声模型（含种子）。
        g_h: 解空间中的数据 g_h。
        states: 长度 N+1 的状态列表，X⁰ = P_h x⁰。
        increments: 长度 N 的噪声增量。
        reports: 长度 N 的单步报告。
    """

    space: FeSpace
    params: SchemeParams
    model: NoiseModel
    g_h: State
    states: List[State] = field(default_factory=list)
    increments: List[NoiseIncrement] = field(default_factory=list)
    reports: List[StepReport] = field(default_factory=list)

    @property
    def grid(self) -> TimeGrid:
        return self.params.grid

    @property
    def N(self) -> int:
        return len(self.states) - 1

    def coefficient_matrix(self) -> np.ndarray:
        """shape (N+1, ndof)。"""
        return np.vstack([s.coefficients for s in self.states])

    def noise_matrix(self) -> np.ndarray:
        """shape (N, J)。"""
        return increments_matrix(self.increments)

    def noise_fields(self) -> np.ndarray:
        """每一步的噪声场系数 Σ_j P_h B_j(X^{i-1}) ξ^{i,j}，shape (N, ndof)。"""
        if not self.increments:
            return np.zeros((0, self.space.dof_count))
        return np.vstack(
            [noise_field(self.model, self.space, self.states[i], inc) for i, inc in enumerate(self.increments)]
        )


def _system_matrix(space: FeSpace, weights: np.ndarray, params: SchemeParams):
    stiffness = assemble_weighted_stiffness(space, weights, constrained=False)
    return apply_dirichlet(space, (1.0 + params.tau * params.lam) * space.mass_matrix + params.tau * stiffness)


def tv_weights(space: FeSpace, coefficients: np.ndarray, epsilon: float) -> np.ndarray:
    """冻结权重 w_T = 1/√(|∇u|_T|² + ε²)。"""
    grads = element_gradients(space, coefficients)
    return 1.0 / np.sqrt(np.sum(grads * grads, axis=1) + epsilon * epsilon)


def step_rhs(space: FeSpace, prev: State, noise_load: np.ndarray, g_h: State, params: SchemeParams) -> np.ndarray:
    """右端项 M X^{i-1} + τλ M g_h + 噪声载荷，受约束行置 0。"""
    M = space.mass_matrix
    rhs = M @ prev.coefficients + params.tau * params.lam * (M @ g_h.coefficients) + noise_load
    rhs[space.constrained] = 0.0
    return rhs


def step(
    space: FeSpace,
    prev: State,
    inc: NoiseIncrement,
    g_h: State,
    params: SchemeParams,
    model: NoiseModel,
) -> Tuple[State, StepReport]:
    """
    求解一个时间步。

    Args:
        space: 有限元空间。
        prev: X^{i-1}。
        inc: 第 i 层噪声增量。
        g_h: 解空间中的数据。
        params: 格式参数。
        model: 噪声模型。

    Returns:
        (X^i, StepReport)

    Raises:
        FixedPointDivergence: 超过最大迭代次数。
        LinearSolveFailure: 内层线性求解失败。
    """
    M = space.mass_matrix
    d = noise_field(model, space, prev, inc)
    rhs = step_rhs(space, prev, apply_B(model, space, prev, inc), g_h, params)

    y = prev.coefficients.copy()
    y[space.constrained] = 0.0
    residual = np.inf
    iterations = 0
    for iterations in range(1, params.max_fixed_point_iter + 1):
        K = _system_matrix(space, tv_weights(space, y, params.epsilon), params)
        y_new = solve_spd(K, rhs, method=params.linear_solver, tol=params.linear_tol)
        y_new[space.constrained] = 0.0
        delta = y_new - y
        residual = float(np.sqrt(max(float(delta @ (M @ delta)), 0.0)))
        y = y_new
        if residual < params.fixed_point_tol:
            break
    else:
        raise FixedPointDivergence(inc.index, iterations, residual)

    if iterations > params.max_fixed_point_iter // 2:
        logger.warning(
            "第 %d 步不动点迭代次数偏多: iterations=%d/%d, residual=%.3e",
            inc.index,
            iterations,
            params.max_fixed_point_iter,
            residual,
        )
    logger.debug("第 %d 步完成: iterations=%d, residual=%.3e", inc.index, iterations, residual)

    new = State(space, y)
    slack = energy_slack(space, prev, new, d, g_h, params)
    report = StepReport(
        index=inc.index,
        iterations=iterations,
        residual=residual,
        energy_slack=slack,
        j_eps=j_eps(space, new, g_h, params.epsilon, params.lam),
        fidelity=0.5 * params.lam * _sq_norm(space, new.coefficients - g_h.coefficients),
    )
    return new, report


def _sq_norm(space: FeSpace, v: np.ndarray) -> float:
    return float(v @ (space.mass_matrix @ v))


@dataclass(frozen=True)
class SlackTerms:
    """单步能量不等式的各组成部分（CSV 中按原始列记录，便于独立复核）。"""

    sq_norm: float
    sq_norm_prev: float
    sq_increment: float
    j_eps: float
    j_eps_zero: float
    noise_pairing: float
    noise_sq: float
    tau: float

    @property
    def slack(self) -> float:
        rhs = self.tau * self.j_eps_zero + self.noise_pairing + self.noise_sq
        lhs = 0.5 * (self.sq_norm - self.sq_norm_prev) + 0.25 * self.sq_increment + self.tau * self.j_eps
        return float(rhs - lhs)


def slack_terms(
    space: FeSpace,
    prev: State,
    new: State,
    noise: np.ndarray,
    g_h: State,
    params: SchemeParams,
) -> SlackTerms:
    """计算单步能量不等式两端的各项，d = noise 为噪声场系数。"""
    M = space.mass_matrix
    x_prev = prev.coefficients
    x_new = new.coefficients
    return SlackTerms(
        sq_norm=_sq_norm(space, x_new),
        sq_norm_prev=_sq_norm(space, x_prev),
        sq_increment=_sq_norm(space, x_new - x_prev),
        j_eps=j_eps(space, x_new, g_h, params.epsilon, params.lam),
        j_eps_zero=j_eps_zero(space, g_h, params.epsilon, params.lam),
        noise_pairing=float(noise @ (M @ x_prev)),
        noise_sq=_sq_norm(space, noise),
        tau=params.tau,
    )


def energy_slack(
    space: FeSpace,
    prev: State,
    new: State,
    noise: np.ndarray,
    g_h: State,
    params: SchemeParams,
) -> float:
    """
    单步路径能量不等式的余量 RHS - LHS：

        RHS = τJ_ε(0) + (d, X^{i-1}) + ‖d‖²
        LHS = ½(‖X^i‖² - ‖X^{i-1}‖²) + ¼‖X^i - X^{i-1}‖² + τJ_ε(X^i)

    d 为噪声场 Σ_j B_j(X^{i-1}) ξ^{i,j}。
    """
    return slack_terms(space, prev, new, noise, g_h, params).slack


def scheme_residual(
    space: FeSpace,
    prev: State,
    new: State,
    noise: np.ndarray,
    g_h: State,
    params: SchemeParams,
) -> np.ndarray:
    """
    把 X^i 代回非线性方程、对所有自由基函数检验得到的残差向量（受约束分量为 0）。
    """
    M = space.mass_matrix
    stiffness = assemble_weighted_stiffness(space, tv_weights(space, new.coefficients, params.epsilon), constrained=False)
    tau = params.tau
    r = (
        M @ (new.coefficients - prev.coefficients)
        + tau * (stiffness @ new.coefficients)
        + tau * params.lam * (M @ (new.coefficients - g_h.coefficients))
        - M @ noise
    )
    r[space.constrained] = 0.0
    return r


def initial_state(space: FeSpace, x0: Union[State, ScalarField], quadrature: int = 3, params: SchemeParams | None = None) -> State:
    """X⁰ = P_h x⁰。"""
    method = params.linear_solver if params is not None else "direct"
    return l2_project(space, x0, quadrature=quadrature, method=method)


def run_trajectory(
    space: FeSpace,
    x0: Union[State, ScalarField],
    g_h: State,
    model: NoiseModel,
    params: SchemeParams,
    quadrature: int = 3,
) -> Trajectory:
    """
    积分完整轨迹。

    Args:
        space: 有限元空间。
        x0: 初值（状态或标量场），先做 L² 投影。
        g_h: 解空间中的数据。
        model: 噪声模型（种子决定整条轨迹）。
        params: 格式参数。
        quadrature: 初值投影用的求积点数。

    Raises:
        TrajectoryError: 某一步失败，携带失败的时间下标。
    """
    if g_h.space.dof_count != space.dof_count:
        raise ValueError("数据 g_h 必须位于解空间中")
    trajectory = Trajectory(space=space, params=params, model=model, g_h=g_h)
    trajectory.states.append(initial_state(space, x0, quadrature, params))

    N = params.N
    tau = params.tau
    J = model.num_components(space, N)
    for i in range(1, N + 1):
        inc = draw_increment(model, i, tau, J)
        try:
            new, report = step(space, trajectory.states[-1], inc, g_h, params, model)
        except (FixedPointDivergence, LinearSolveFailure) as exc:
            raise TrajectoryError(i, exc) from exc
        trajectory.states.append(new)
        trajectory.increments.append(inc)
        trajectory.reports.append(report)
    return trajectory


def check_energy_inequality(traj: Trajectory) -> np.ndarray:
    """
    对完整轨迹逐步重新计算路径能量不等式余量，shape (N,)。
    """
    fields = traj.noise_fields()
    return np.array(
        [
            energy_slack(traj.space, traj.states[i - 1], traj.states[i], fields[i - 1], traj.g_h, traj.params)
            for i in range(1, traj.N + 1)
        ]
    )


def trajectory_slack_terms(traj: Trajectory) -> List[SlackTerms]:
    """逐步的能量不等式组成部分，长度 N。"""
    fields = traj.noise_fields()
    return [
        slack_terms(traj.space, traj.states[i - 1], traj.states[i], fields[i - 1], traj.g_h, traj.params)
        for i in range(1, traj.N + 1)
    ]
