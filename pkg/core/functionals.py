"""
标量泛函

估计与定义中出现的所有标量量：
- 正则化能量 J_ε、离散全变差、保真项、边界迹项
- 离散 H⁻¹ 范数（单位权 Dirichlet 问题的逆）
- 时间插值（线性 / 右常值 / 左常值）与 H⁻¹ 连续模
- 分段线性路径的离散 Besov 上界
- 全变差的对偶下界、离散 Poincaré 常数
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh

from .clock import TimeGrid
from .fespace import P1, Coefficients, FeSpace, State, coefficients_of, element_gradients, evaluate_in
from .linalg import factorize
from .quadrature import get_rule


LINEAR = "linear"
RIGHT_CONSTANT = "right_constant"
LEFT_CONSTANT = "left_constant"
INTERPOLANT_KINDS = (LINEAR, RIGHT_CONSTANT, LEFT_CONSTANT)

HMINUS1 = "hminus1"

# 时间节点判等容差（相对 τ）
NODE_TOLERANCE = 1e-9

# 特征值问题改用稀疏求解器的自由度阈值
DENSE_EIGEN_LIMIT = 400


class FunctionalError(ValueError):
    """泛函参数非法（指数越界、时间越界、不支持的单元类型等）。"""


@dataclass(frozen=True)
class EnergyBreakdown:
    """
    能量分解。

    Attributes:
        tv_eps: ∫√(|∇u|²+ε²)
        fidelity: (λ/2)∫|u-g|²
        tv: ∫|∇_h u|，离散全变差
        boundary_term: ∫_{∂O}|u|，受约束状态为 0
        total_Jeps: tv_eps + fidelity
        total_J: tv + boundary_term + fidelity
    """

    tv_eps: float
    fidelity: float
    tv: float
    boundary_term: float
    total_Jeps: float
    total_J: float


def _difference(space: FeSpace, state: Coefficients, g_h: Coefficients | None) -> np.ndarray:
    u = coefficients_of(space, state)
    if g_h is None:
        return u
    return u - coefficients_of(space, g_h)


def tv_eps_value(space: FeSpace, state: Coefficients, epsilon: float) -> float:
    grads = element_gradients(space, state)
    return float(np.sum(space.mesh.areas * np.sqrt(np.sum(grads * grads, axis=1) + epsilon * epsilon)))


def tv_value(space: FeSpace, state: Coefficients) -> float:
    """离散全变差 Σ_T |T||∇u|_T|。"""
    grads = element_gradients(space, state)
    return float(np.sum(space.mesh.areas * np.sqrt(np.sum(grads * grads, axis=1))))


def fidelity_value(space: FeSpace, state: Coefficients, g_h: Coefficients | None, lam: float) -> float:
    diff = _difference(space, state, g_h)
    return float(0.5 * lam * (diff @ (space.mass_matrix @ diff)))


def boundary_trace_value(space: FeSpace, state: Coefficients) -> float:
    """
    ∫_{∂O}|u|，逐边精确：边界边上的迹取相邻三角形的仿射限制。
    """
    mesh = space.mesh
    tri, local = np.nonzero(mesh.boundary_edges[mesh.tri_edges])
    if tri.size == 0:
        return 0.0
    eye = np.eye(3)
    a = evaluate_in(space, state, tri, eye[(local + 1) % 3])
    b = evaluate_in(space, state, tri, eye[(local + 2) % 3])
    edges = mesh.edges[mesh.tri_edges[tri, local]]
    length = np.linalg.norm(mesh.vertices[edges[:, 0]] - mesh.vertices[edges[:, 1]], axis=1)
    abs_sum = np.abs(a) + np.abs(b)
    same_sign = a * b >= 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        crossing = np.where(abs_sum > 0.0, (a * a + b * b) / (2.0 * abs_sum), 0.0)
    integral = np.where(same_sign, 0.5 * abs_sum, crossing)
    return float(np.sum(length * integral))


def energy(
    space: FeSpace,
    state: Coefficients,
    g_h: Coefficients | None = None,
    epsilon: float = 1e-4,
    lam: float = 0.0,
) -> EnergyBreakdown:
    """
    计算能量分解；梯度分片常数，所以 tv 与 tv_eps 没有求积误差。

    Args:
        space: 有限元空间。
        state: 状态。
        g_h: 同一空间中的数据，None 表示 g = 0。
        epsilon: 正则化参数 ε。
        lam: 保真项权重 λ。
    """
    tv_eps = tv_eps_value(space, state, epsilon)
    tv = tv_value(space, state)
    fidelity = fidelity_value(space, state, g_h, lam)
    boundary = boundary_trace_value(space, state)
    return EnergyBreakdown(
        tv_eps=tv_eps,
        fidelity=fidelity,
        tv=tv,
        boundary_term=boundary,
        total_Jeps=tv_eps + fidelity,
        total_J=tv + boundary + fidelity,
    )


def j_eps(space: FeSpace, state: Coefficients, g_h: Coefficients | None, epsilon: float, lam: float) -> float:
    """J_ε(u) = ∫√(|∇u|²+ε²) + (λ/2)∫|u-g|²。"""
    return tv_eps_value(space, state, epsilon) + fidelity_value(space, state, g_h, lam)


def j_eps_zero(space: FeSpace, g_h: Coefficients | None, epsilon: float, lam: float) -> float:
    """J_ε(0) = ε|O| + (λ/2)‖g‖²。"""
    return j_eps(space, np.zeros(space.dof_count), g_h, epsilon, lam)


# ---- 离散 H⁻¹ 范数 ---------------------------------------------------------


def hminus1_solver(space: FeSpace) -> Callable[[np.ndarray], np.ndarray]:
    """
    返回 f -> z 的求解函数，z 满足 A z = M f（自由自由度上），受约束分量为 0。
    f 可以是 shape (ndof,) 或 (ndof, k)。
    """
    solve = factorize(space.dirichlet_stiffness)
    mass = space.mass_matrix
    constrained = space.constrained

    def apply(f: np.ndarray) -> np.ndarray:
        rhs = np.asarray(mass @ f, dtype=float)
        rhs[constrained] = 0.0
        z = solve(rhs)
        z[constrained] = 0.0
        return z

    return apply


def hminus1_norm(space: FeSpace, f: Coefficients) -> float:
    """‖f‖_{-1,h} = √(f, z)，A z = M f。"""
    vec = coefficients_of(space, f)
    z = hminus1_solver(space)(vec)
    return float(np.sqrt(max(float(vec @ (space.mass_matrix @ z)), 0.0)))


def hminus1_gram(space: FeSpace, coefficients: np.ndarray) -> np.ndarray:
    """
    一组状态的 H⁻¹ Gram 矩阵 G_ab = (f_a, A⁻¹ M f_b)。
    ‖f_a - f_b‖² = G_aa + G_bb - 2 G_ab。

    Args:
        coefficients: shape (k, ndof)。
    """
    F = np.atleast_2d(np.asarray(coefficients, dtype=float))
    Z = hminus1_solver(space)(F.T)
    G = F @ (space.mass_matrix @ Z)
    return 0.5 * (G + G.T)


def gram_distances(gram: np.ndarray) -> np.ndarray:
    """由 Gram 矩阵得到两两距离矩阵。"""
    d = np.diag(gram)
    sq = d[:, None] + d[None, :] - 2.0 * gram
    return np.sqrt(np.maximum(sq, 0.0))


def poincare_constant(space: FeSpace) -> float:
    """
    离散 Poincaré 常数 C_P = 1/√λ₁,h，λ₁,h 为 A v = λ M v 在自由自由度上的最小特征值。
    满足 ‖f‖_{-1,h} ≤ C_P ‖f‖_{L²}。
    """
    free = space.free_dofs
    A = space.dirichlet_stiffness[free][:, free]
    M = space.mass_matrix[free][:, free]
    if free.size <= DENSE_EIGEN_LIMIT:
        lam1 = scipy.linalg.eigh(A.toarray(), M.toarray(), eigvals_only=True, subset_by_index=[0, 0])[0]
    else:
        lam1 = eigsh(sp.csc_matrix(A), k=1, M=sp.csc_matrix(M), sigma=0.0, which="LM", return_eigenvectors=False)[0]
    return float(1.0 / np.sqrt(lam1))


def first_dirichlet_eigenpair(space: FeSpace) -> tuple[float, np.ndarray]:
    """最小离散 Dirichlet 特征值及其特征函数（扩展到全部自由度，M 正交归一）。"""
    free = space.free_dofs
    A = space.dirichlet_stiffness[free][:, free].toarray()
    M = space.mass_matrix[free][:, free].toarray()
    vals, vecs = scipy.linalg.eigh(A, M, subset_by_index=[0, 0])
    full = np.zeros(space.dof_count)
    full[free] = vecs[:, 0]
    return float(vals[0]), full


# ---- 时间插值 --------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PathInterpolant:
    """
    轨迹的时间插值。

    Attributes:
        space: 有限元空间。
        grid: 时间网格。
        states: 节点值 X⁰..X^N 的系数矩阵，shape (N+1, ndof)。
        kind: "linear"、"right_constant"（X̄，(t_{i-1}, t_i] 上取 X^i）
              或 "left_constant"（X̲，[t_{i-1}, t_i) 上取 X^{i-1}）。
    """

    space: FeSpace
    grid: TimeGrid
    states: np.ndarray
    kind: str = LINEAR

    def __post_init__(self) -> None:
        if self.kind not in INTERPOLANT_KINDS:
            raise FunctionalError(f"未知的插值类型: {self.kind}（可选 {', '.join(INTERPOLANT_KINDS)}）")
        if self.states.shape[0] != self.grid.steps + 1:
            raise FunctionalError("插值节点个数必须为 N+1")

    @classmethod
    def from_trajectory(cls, trajectory, kind: str = LINEAR) -> "PathInterpolant":
        return cls(trajectory.space, trajectory.grid, trajectory.coefficient_matrix(), kind)


def _interpolant_coefficients(interp: PathInterpolant, t: float) -> np.ndarray:
    grid = interp.grid
    T = grid.T
    if t < -NODE_TOLERANCE * T or t > T * (1.0 + NODE_TOLERANCE):
        raise FunctionalError(f"时间 t={t} 不在 [0, {T}] 内")
    N = grid.steps
    X = interp.states
    if N == 0:
        return X[0]
    s = min(max(t / grid.tau, 0.0), float(N))
    k = int(round(s))
    at_node = abs(s - k) <= NODE_TOLERANCE
    if at_node:
        return X[k]
    i = int(np.ceil(s))  # t ∈ (t_{i-1}, t_i)
    if interp.kind == RIGHT_CONSTANT:
        return X[i]
    if interp.kind == LEFT_CONSTANT:
        return X[i - 1]
    theta = s - (i - 1)
    return (1.0 - theta) * X[i - 1] + theta * X[i]


def evaluate_interpolant(interp: PathInterpolant, t: float) -> State:
    """
    在时刻 t 计算插值。节点处三种插值都取 X^i
    （X̄ 左连续、X̲ 右连续，端点 T 处 X̲ 取 X^N）。

    Raises:
        FunctionalError: t 不在 [0, T] 内。
    """
    return State(interp.space, _interpolant_coefficients(interp, float(t)).copy())


def candidate_times(grid: TimeGrid, delta: float) -> np.ndarray:
    """
    线性插值连续模的候选时刻：节点 t_i 与 t_i ± δ（截断到 [0, T]）。

    在每个 (t, s) 分片上 ‖f(t) - f(s)‖ 是凸函数，上确界在分片顶点取到，
    顶点的坐标都落在这组时刻中。
    """
    nodes = grid.times()
    candidates = np.concatenate([nodes, nodes + delta, nodes - delta])
    return np.unique(np.clip(candidates, 0.0, float(grid.T)))


def _constant_pairs(steps: int, tau: float, delta: float) -> np.ndarray:
    """
    分段常数插值：单元 j、k（j < k）中存在 |t - s| ≤ δ 的点对，当且仅当 (k - j - 1)τ < δ。
    单元按节点值 X^j 编号（X̄ 的 {0}、X̲ 的 {T} 各自单独成一个单元）。
    """
    idx = np.arange(steps + 1)
    gap = np.abs(idx[:, None] - idx[None, :]) - 1
    return gap * tau < delta * (1.0 - NODE_TOLERANCE)


def modulus_of_continuity(interp: PathInterpolant, delta: float, norm: str = HMINUS1) -> float:
    """
    H⁻¹ 连续模 m(f, δ) = sup{‖f(t) - f(s)‖_{-1,h} : |t - s| ≤ δ}。

    线性插值在 candidate_times 给出的候选时刻上取上确界；分段常数插值直接比较
    可以相距不超过 δ 的单元（任意 δ > 0 都跨过相邻节点处的跳跃）。

    Raises:
        FunctionalError: δ ≤ 0 或不支持的范数。
    """
    if delta <= 0:
        raise FunctionalError(f"δ 必须为正, got {delta}")
    if norm != HMINUS1:
        raise FunctionalError(f"不支持的探测范数: {norm}")
    grid = interp.grid
    if grid.steps == 0:
        return 0.0
    if interp.kind == LINEAR:
        times = candidate_times(grid, delta)
        coeffs = np.vstack([_interpolant_coefficients(interp, t) for t in times])
        admissible = np.abs(times[:, None] - times[None, :]) <= delta * (1.0 + NODE_TOLERANCE)
    else:
        coeffs = interp.states
        admissible = _constant_pairs(grid.steps, float(grid.tau), delta)
    dist = gram_distances(hminus1_gram(interp.space, coeffs))
    return float(np.max(np.where(admissible, dist, 0.0)))


# ---- 离散 Besov 上界 ----------------------------------------------------------


def _increment_norms(values: np.ndarray, lag: int) -> np.ndarray:
    diff = values[lag:] - values[:-lag]
    if diff.ndim == 1:
        return np.abs(diff)
    return np.linalg.norm(diff.reshape(diff.shape[0], -1), axis=1)


def increment_moment(values: np.ndarray, tau: float, lag: int, a: float) -> float:
    """f_{i,a} = [τ Σ_{j=i}^N ‖f(t_j) - f(t_{j-i})‖^a]^{1/a}；a = ∞ 时取最大值。"""
    norms = _increment_norms(values, lag)
    if np.isinf(a):
        return float(np.max(norms))
    return float((tau * np.sum(norms**a)) ** (1.0 / a))


def besov_seminorm(values: Sequence[float] | np.ndarray, tau: float, s: float, p: float, q: float) -> float:
    """
    分段线性路径的 Besov 半范数上界（可计算的多数量）：

        q < ∞:  8/(s(1-s)) · (Σ_{i=1}^{N-1} τ f_{i,p}^q / t_i^{1+sq})^{1/q}
        q = ∞:  3 · max_{1≤i<N} f_{i,p} / t_i^s

    Args:
        values: 节点值 f(t_0..t_N)，标量或向量（按行取欧氏范数）。
        tau: 时间步长。
        s: 光滑指数，0 < s < 1。
        p: 积分指数，1 ≤ p ≤ ∞。
        q: 求和指数，1 ≤ q ≤ ∞。

    Raises:
        FunctionalError: 指数越界。
    """
    if not 0.0 < s < 1.0:
        raise FunctionalError(f"s 必须在 (0, 1) 内, got {s}")
    if not (p >= 1.0) or not (q >= 1.0):
        raise FunctionalError(f"p、q 必须 ≥ 1, got p={p}, q={q}")
    if tau <= 0:
        raise FunctionalError(f"τ 必须为正, got {tau}")
    f = np.asarray(values, dtype=float)
    N = f.shape[0] - 1
    if N < 2:
        return 0.0
    lags = np.arange(1, N)
    f_ip = np.array([increment_moment(f, tau, int(i), p) for i in lags])
    t = tau * lags
    if np.isinf(q):
        return float(3.0 * np.max(f_ip / t**s))
    total = np.sum(tau * f_ip**q / t ** (1.0 + s * q))
    return float(8.0 / (s * (1.0 - s)) * total ** (1.0 / q))


def discrete_lr_norm(values: Sequence[float] | np.ndarray, tau: float, r: float) -> float:
    """‖f‖_{L^r(0,T)} 的节点上界 [Σ τ‖f(t_i)‖^r]^{1/r}；r = ∞ 时取节点最大值。"""
    f = np.asarray(values, dtype=float)
    norms = np.abs(f) if f.ndim == 1 else np.linalg.norm(f.reshape(f.shape[0], -1), axis=1)
    if np.isinf(r):
        return float(np.max(norms))
    return float((tau * np.sum(norms**r)) ** (1.0 / r))


# ---- 全变差的对偶下界 ---------------------------------------------------------


def recovered_vertex_gradient(space: FeSpace, state: Coefficients) -> np.ndarray:
    """按面积加权平均相邻单元梯度得到的顶点梯度，shape (nv, 2)。"""
    mesh = space.mesh
    grads = element_gradients(space, state)
    weights = np.repeat(mesh.areas, 3)
    tri_vertices = mesh.triangles.ravel()
    num = np.zeros((mesh.num_vertices, 2))
    np.add.at(num, tri_vertices, weights[:, None] * np.repeat(grads, 3, axis=0))
    den = np.bincount(tri_vertices, weights=weights, minlength=mesh.num_vertices)
    return num / den[:, None]


def dual_tv_lower_bound(space: FeSpace, state: Coefficients, delta: float | None = None) -> float:
    """
    全变差的对偶下界 -∫u div v = ∫∇u·v，其中 v = G/√(|G|²+δ²)，
    G 为恢复梯度的 P1 插值，|v| ≤ 1 且 v Lipschitz。结果不超过 tv。

    Args:
        delta: 正则化参数，默认取恢复梯度最大模的 1e-3。

    Raises:
        FunctionalError: 非 P1 状态（CR 函数的分部积分带跳跃项）。
    """
    if space.kind != P1:
        raise FunctionalError("对偶下界只对 P1 状态有定义")
    mesh = space.mesh
    G = recovered_vertex_gradient(space, state)
    if delta is None:
        delta = 1e-3 * float(np.max(np.linalg.norm(G, axis=1)))
    if delta <= 0.0:
        return 0.0
    rule = get_rule(7)
    Gq = np.einsum("qk,tkd->tqd", rule.barycentric, G[mesh.triangles])
    v = Gq / np.sqrt(np.sum(Gq * Gq, axis=2) + delta * delta)[..., None]
    grads = element_gradients(space, state)
    integrand = np.einsum("tqd,td->tq", v, grads)
    return float(np.sum(mesh.areas * (integrand @ rule.weights)))


# ---- 分片常数投影的误差 ---------------------------------------------------------


def p0_distance_squared(reference_space: FeSpace, p0_values: np.ndarray, reference: Coefficients) -> float:
    """
    ‖c - w‖²_{L²}，c 为同一网格上的分片常数，w 为 P1 函数；逐单元精确积分。
    """
    if reference_space.kind != P1:
        raise FunctionalError("参考函数必须是 P1 函数")
    mesh = reference_space.mesh
    w = coefficients_of(reference_space, reference)[mesh.triangles]
    c = np.asarray(p0_values, dtype=float)
    if c.shape != (mesh.num_triangles,):
        raise FunctionalError("分片常数的个数必须等于三角形个数")
    mean = w.mean(axis=1)
    sq = (np.sum(w * w, axis=1) + w[:, 0] * w[:, 1] + w[:, 1] * w[:, 2] + w[:, 2] * w[:, 0]) / 6.0
    per_tri = c * c - 2.0 * c * mean + sq
    return float(np.sum(mesh.areas * np.maximum(per_tri, 0.0)))
