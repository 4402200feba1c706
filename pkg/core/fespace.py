"""
有限元空间：协调 P1 空间 V_h 与非协调 Crouzeix-Raviart 空间 V_cr

- P1：自由度位于网格顶点，基函数为重心坐标 λ_k。
- CR：自由度位于边中点 b_S，局部基函数 ψ_k = 1 - 2λ_k（与局部顶点 k 相对的边上取 1）。

两种空间共享同一条装配路径：
单元上的基函数都是仿射的，质量矩阵与加权刚度矩阵按闭式公式逐单元计算，
齐次 Dirichlet 条件通过「单位行替换」施加（保留自由度编号，不做消元）。
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Union

import numpy as np
import scipy.sparse as sp

from utils.logger import get_logger

from .linalg import solve_spd
from .mesh import Mesh
from .quadrature import QuadratureRule, get_rule


logger = get_logger()

P1 = "p1"
CR = "cr"
ELEMENT_KINDS = (P1, CR)

# 标量场回调：f(x, y) -> values，x、y 为同 shape 的 numpy 数组
ScalarField = Callable[[np.ndarray, np.ndarray], np.ndarray]

_P1_ELEMENT_MASS = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0
_CR_ELEMENT_MASS = np.eye(3) / 3.0


class AssemblyError(ValueError):
    """空间构造、算子装配或状态向量维度错误。"""


@dataclass(frozen=True, eq=False)
class FeSpace:
    """
    有限元空间（构造后不可变，可在并发 worker 间共享）。

    Attributes:
        kind: "p1" 或 "cr"。
        mesh: 所在网格。
        dof_points: 自由度对应的几何位置（顶点或边中点），shape (ndof, 2)。
        element_dofs: 每个三角形的三个局部自由度编号，shape (nt, 3)。
        constrained: 受 Dirichlet 约束的自由度掩码，shape (ndof,)。
        basis_gradients: 局部基函数梯度表，shape (nt, 3, 2)。
    """

    kind: str
    mesh: Mesh
    dof_points: np.ndarray
    element_dofs: np.ndarray
    constrained: np.ndarray
    basis_gradients: np.ndarray

    @property
    def dof_count(self) -> int:
        return int(self.dof_points.shape[0])

    @cached_property
    def free_dofs(self) -> np.ndarray:
        """自由（未约束）自由度编号，按编号升序。噪声分量 j 对应第 j 个自由度。"""
        return np.flatnonzero(~self.constrained)

    @property
    def num_free(self) -> int:
        return int(self.free_dofs.shape[0])

    @cached_property
    def mass_matrix(self) -> sp.csr_matrix:
        """未约束的质量矩阵，用于所有二次型（范数、保真项、能量）。"""
        return assemble_mass(self, constrained=False)

    @cached_property
    def constrained_mass_matrix(self) -> sp.csr_matrix:
        return assemble_mass(self, constrained=True)

    @cached_property
    def dirichlet_stiffness(self) -> sp.csr_matrix:
        """单位权重、已施加约束的 Dirichlet 刚度矩阵。"""
        return assemble_weighted_stiffness(self, np.ones(self.mesh.num_triangles), constrained=True)

    def basis_values(self, barycentric: np.ndarray) -> np.ndarray:
        """局部基函数在给定重心坐标处的取值，shape 与输入相同。"""
        if self.kind == P1:
            return np.asarray(barycentric, dtype=float)
        return 1.0 - 2.0 * np.asarray(barycentric, dtype=float)

    def zero(self) -> "State":
        return State(self, np.zeros(self.dof_count))

    def describe(self) -> str:
        return f"{self.kind.upper()}(level={self.mesh.level}, dofs={self.dof_count}, free={self.num_free})"


@dataclass(frozen=True, eq=False)
class State:
    """
    某一时间层上的离散函数。

    求解器产生的状态在受约束自由度上为 0；
    诊断用的未约束状态（例如图像数据插值）允许非零边界值。
    """

    space: FeSpace
    coefficients: np.ndarray

    def __post_init__(self) -> None:
        coeffs = np.asarray(self.coefficients, dtype=float)
        if coeffs.shape != (self.space.dof_count,):
            raise AssemblyError(
                f"状态向量长度与空间不匹配: got {coeffs.shape}, expected ({self.space.dof_count},)"
            )
        object.__setattr__(self, "coefficients", coeffs)

    def is_constrained(self) -> bool:
        """受约束自由度是否全为 0。"""
        return bool(np.all(self.coefficients[self.space.constrained] == 0.0))


Coefficients = Union[State, np.ndarray]


def coefficients_of(space: FeSpace, value: Coefficients) -> np.ndarray:
    if isinstance(value, State):
        if value.space is not space and value.space.dof_count != space.dof_count:
            raise AssemblyError("状态不属于当前空间")
        return value.coefficients
    arr = np.asarray(value, dtype=float)
    if arr.shape[0] != space.dof_count:
        raise AssemblyError(f"系数向量长度不匹配: got {arr.shape[0]}, expected {space.dof_count}")
    return arr


def _barycentric_gradients(mesh: Mesh) -> np.ndarray:
    """重心坐标 λ_k 的梯度：与顶点 k 相对的边向量逆时针旋转 90° 再除以 2|T|。"""
    p = mesh.vertices[mesh.triangles]
    opposite = np.roll(p, -2, axis=1) - np.roll(p, -1, axis=1)  # p_{k+2} - p_{k+1}
    rotated = np.stack([-opposite[..., 1], opposite[..., 0]], axis=-1)
    return rotated / (2.0 * mesh.areas)[:, None, None]


def make_space(mesh: Mesh, kind: str) -> FeSpace:
    """
    在网格上构造 P1 或 CR 空间。

    Raises:
        AssemblyError: 未知的单元类型。
    """
    kind = str(kind).lower()
    grad_lambda = _barycentric_gradients(mesh)
    if kind == P1:
        space = FeSpace(
            kind=P1,
            mesh=mesh,
            dof_points=mesh.vertices,
            element_dofs=mesh.triangles,
            constrained=mesh.boundary_vertices,
            basis_gradients=grad_lambda,
        )
    elif kind == CR:
        space = FeSpace(
            kind=CR,
            mesh=mesh,
            dof_points=mesh.edge_midpoints,
            element_dofs=mesh.tri_edges,
            constrained=mesh.boundary_edges,
            basis_gradients=-2.0 * grad_lambda,
        )
    else:
        raise AssemblyError(f"未知的单元类型: {kind}（可选 {', '.join(ELEMENT_KINDS)}）")
    logger.debug("有限元空间构造完成: %s", space.describe())
    return space


def _scatter(space: FeSpace, local: np.ndarray) -> sp.csr_matrix:
    """把 (nt, 3, 3) 的单元矩阵累加为全局稀疏矩阵。"""
    dofs = space.element_dofs
    rows = np.broadcast_to(dofs[:, :, None], local.shape).ravel()
    cols = np.broadcast_to(dofs[:, None, :], local.shape).ravel()
    n = space.dof_count
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def apply_dirichlet(space: FeSpace, matrix: sp.spmatrix) -> sp.csr_matrix:
    """受约束自由度的行列替换为单位阵。"""
    free = sp.diags((~space.constrained).astype(float))
    fixed = sp.diags(space.constrained.astype(float))
    return sp.csr_matrix(free @ matrix @ free + fixed)


def element_mass(space: FeSpace) -> np.ndarray:
    """单元质量矩阵，shape (nt, 3, 3)。"""
    reference = _P1_ELEMENT_MASS if space.kind == P1 else _CR_ELEMENT_MASS
    return space.mesh.areas[:, None, None] * reference[None, :, :]


def assemble_mass(space: FeSpace, constrained: bool = True) -> sp.csr_matrix:
    """
    装配质量矩阵。

    Args:
        space: 有限元空间。
        constrained: 是否把受约束自由度的行列替换为单位阵（求解用）。

    Returns:
        对称稀疏矩阵。
    """
    matrix = _scatter(space, element_mass(space))
    return apply_dirichlet(space, matrix) if constrained else matrix


def assemble_weighted_stiffness(space: FeSpace, weights: np.ndarray, constrained: bool = True) -> sp.csr_matrix:
    """
    装配加权刚度矩阵 Σ_T w_T |T| ∇φ_a·∇φ_b。

    Args:
        space: 有限元空间。
        weights: 每个三角形一个正权重。
        constrained: 是否施加 Dirichlet 单位行替换。

    Raises:
        AssemblyError: 权重个数不符，或存在非正、NaN 权重。
    """
    w = np.asarray(weights, dtype=float)
    if w.shape != (space.mesh.num_triangles,):
        raise AssemblyError(f"权重个数必须等于三角形个数 {space.mesh.num_triangles}, got {w.shape}")
    if not np.all(np.isfinite(w)) or np.any(w <= 0.0):
        raise AssemblyError("刚度权重必须是有限正数")
    g = space.basis_gradients
    local = (w * space.mesh.areas)[:, None, None] * np.einsum("tad,tbd->tab", g, g)
    matrix = _scatter(space, local)
    return apply_dirichlet(space, matrix) if constrained else matrix


def element_gradients(space: FeSpace, state: Coefficients) -> np.ndarray:
    """所有三角形上的（分片常数）梯度 ∇_h u，shape (nt, 2)。"""
    c = coefficients_of(space, state)[space.element_dofs]
    return np.einsum("tk,tkd->td", c, space.basis_gradients)


def element_gradient(space: FeSpace, state: Coefficients, triangle: int) -> np.ndarray:
    """单个三角形上仿射限制的梯度。"""
    c = coefficients_of(space, state)[space.element_dofs[triangle]]
    return c @ space.basis_gradients[triangle]


def project_p0(space: FeSpace, state: Coefficients) -> np.ndarray:
    """
    分片常数投影 Π⁰_h：每个三角形上取仿射限制的均值（三个局部自由度的平均值）。
    """
    return coefficients_of(space, state)[space.element_dofs].mean(axis=1)


def evaluate_in(space: FeSpace, state: Coefficients, triangles: np.ndarray, barycentric: np.ndarray) -> np.ndarray:
    """在指定三角形内按重心坐标求值（不做点定位）。"""
    c = coefficients_of(space, state)[space.element_dofs[triangles]]
    return np.sum(c * space.basis_values(barycentric), axis=-1)


def evaluate(space: FeSpace, state: Coefficients, points: np.ndarray) -> np.ndarray:
    """
    在任意点处计算有限元函数的值。

    公共边上的点归入某一侧三角形；CR 函数在边上不连续，此时取该侧的迹。
    """
    tri, bary = space.mesh.locate(points)
    return evaluate_in(space, state, tri, bary)


def nodal_interpolate(space: FeSpace, f: ScalarField, constrain: bool = False) -> State:
    """
    节点插值：系数取 f 在自由度位置（顶点或边中点）上的值。

    Args:
        space: 目标空间。
        f: 标量场 f(x, y)。
        constrain: 为 True 时把受约束自由度置 0。图像数据默认不置 0。
    """
    pts = space.dof_points
    values = np.asarray(f(pts[:, 0], pts[:, 1]), dtype=float)
    values = np.broadcast_to(values, (space.dof_count,)).copy()
    if constrain:
        values[space.constrained] = 0.0
    return State(space, values)


def transfer(state: State, target: FeSpace, constrain: bool = False) -> State:
    """把一个状态通过节点插值搬到另一个空间（不同层数或不同单元类型）。"""
    source = state.space
    return nodal_interpolate(target, lambda x, y: evaluate(source, state, np.column_stack([x, y])), constrain)


def quadrature_load(space: FeSpace, values: np.ndarray, rule: QuadratureRule) -> np.ndarray:
    """
    由求积点上的场值装配载荷向量 b_a = Σ_T |T| Σ_q w_q f(x_q) ψ_a(x_q)。

    Args:
        values: shape (nt, q) 的场值。
    """
    psi = space.basis_values(rule.barycentric)  # (q, 3)
    local = np.einsum("tq,q,qa->ta", values, rule.weights, psi) * space.mesh.areas[:, None]
    return np.bincount(space.element_dofs.ravel(), weights=local.ravel(), minlength=space.dof_count)


def sample_at_quadrature(space: FeSpace, f: Union[ScalarField, State], rule: QuadratureRule) -> np.ndarray:
    """在本空间网格的求积点上对回调或（任意空间的）状态取值，shape (nt, q)。"""
    mesh = space.mesh
    if isinstance(f, State):
        if f.space is space:
            nt = mesh.num_triangles
            tri = np.repeat(np.arange(nt), rule.num_points)
            bary = np.tile(rule.barycentric, (nt, 1))
            return evaluate_in(space, f, tri, bary).reshape(nt, rule.num_points)
        pts = rule.physical_points(mesh.vertices[mesh.triangles]).reshape(-1, 2)
        return evaluate(f.space, f, pts).reshape(mesh.num_triangles, rule.num_points)
    pts = rule.physical_points(mesh.vertices[mesh.triangles])
    values = np.asarray(f(pts[..., 0], pts[..., 1]), dtype=float)
    return np.broadcast_to(values, pts.shape[:2])


def l2_project(
    space: FeSpace,
    f: Union[ScalarField, State],
    quadrature: int = 3,
    method: str = "direct",
    tol: float = 1e-10,
) -> State:
    """
    L² 正交投影 P_h 到带齐次 Dirichlet 条件的空间。

    Args:
        space: 目标空间。
        f: 标量场回调，或其他空间（也可以是本空间）的状态。
        quadrature: 求积点数（3 或 7）。
        method: 线性求解方式。
        tol: cg 容差。

    Returns:
        满足约束的投影状态。
    """
    rule = get_rule(quadrature)
    load = quadrature_load(space, sample_at_quadrature(space, f, rule), rule)
    load[space.constrained] = 0.0
    coeffs = solve_spd(space.constrained_mass_matrix, load, method=method, tol=tol)
    coeffs[space.constrained] = 0.0
    return State(space, coeffs)


def l2_inner(space: FeSpace, a: Coefficients, b: Coefficients) -> float:
    """L² 内积 (a, b)，使用未约束质量矩阵。"""
    return float(coefficients_of(space, a) @ (space.mass_matrix @ coefficients_of(space, b)))


def l2_norm(space: FeSpace, state: Coefficients) -> float:
    return float(np.sqrt(max(l2_inner(space, state, state), 0.0)))


def h1_seminorm(space: FeSpace, state: Coefficients) -> float:
    """离散 H¹₀ 半范数 ‖∇_h u‖_{L²}。"""
    grads = element_gradients(space, state)
    return float(np.sqrt(np.sum(space.mesh.areas * np.sum(grads * grads, axis=1))))
