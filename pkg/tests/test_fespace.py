"""
有限元空间测试（P1 与 Crouzeix-Raviart）
"""

import pathlib
import sys

# 添加项目根目录到路径
project_root = pathlib.Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

import numpy as np
import pytest

from core.fespace import (
    CR,
    P1,
    AssemblyError,
    State,
    assemble_mass,
    assemble_weighted_stiffness,
    element_gradient,
    element_gradients,
    evaluate,
    evaluate_in,
    h1_seminorm,
    l2_project,
    make_space,
    nodal_interpolate,
    project_p0,
    transfer,
)
from core.functionals import tv_value
from core.mesh import build_crisscross, edge_barycenters


def _space(level, kind):
    return make_space(build_crisscross(level), kind)


def test_free_dof_counts_level1():
    """level=1：P1 自由度 5 个（1 个内部网格点 + 4 个中心），CR 自由度 20 个（内部边）。"""
    assert _space(1, P1).num_free == 5
    assert _space(1, CR).num_free == 20
    print("[OK] level=1 自由度个数正确")


@pytest.mark.parametrize("kind", [P1, CR])
def test_mass_partition_of_unity(kind):
    """未约束质量矩阵所有元素之和为区域面积 1。"""
    space = _space(3, kind)
    M = assemble_mass(space, constrained=False)
    assert abs(M.sum() - 1.0) < 1e-13
    ones = np.ones(space.dof_count)
    assert np.allclose(element_gradients(space, ones), 0.0, atol=1e-12)


def test_mass_quadratic_form_oracle():
    """level=2 P1，u = x(1-x)y(1-y) 的插值：二次型与逐单元精确积分一致。"""
    space = _space(2, P1)
    u = nodal_interpolate(space, lambda x, y: x * (1 - x) * y * (1 - y)).coefficients
    value = float(u @ (space.mass_matrix @ u))

    mesh = space.mesh
    c = u[mesh.triangles]
    pair = c[:, 0] * c[:, 1] + c[:, 0] * c[:, 2] + c[:, 1] * c[:, 2]
    oracle = float(np.sum(mesh.areas / 6.0 * (np.sum(c * c, axis=1) + pair)))
    assert abs(value - oracle) <= 1e-12 * oracle


def test_cr_mass_is_diagonal():
    space = _space(2, CR)
    M = space.mass_matrix.toarray()
    assert np.allclose(M, np.diag(np.diag(M)))


@pytest.mark.parametrize("kind", [P1, CR])
def test_stiffness_affine(kind):
    """单位权重、仿射插值：二次型 = |∇u|²·|O|。"""
    space = _space(3, kind)
    u = nodal_interpolate(space, lambda x, y: 2.0 * x + 3.0 * y).coefficients
    K = assemble_weighted_stiffness(space, np.ones(space.mesh.num_triangles), constrained=False)
    assert abs(float(u @ (K @ u)) - 13.0) < 1e-11


def test_stiffness_hand_assembly_level1():
    """level=1 P1，中心网格点 (0.5, 0.5) 的帽函数：8 个相邻三角形各贡献 (1/16)·8，合计 4。"""
    space = _space(1, P1)
    k = int(np.flatnonzero(np.all(space.mesh.vertices == [0.5, 0.5], axis=1))[0])
    K = assemble_weighted_stiffness(space, np.ones(space.mesh.num_triangles))
    assert abs(K[k, k] - 4.0) < 1e-13


def test_stiffness_positive_semidefinite():
    space = _space(2, CR)
    rng = np.random.default_rng(1)
    K = assemble_weighted_stiffness(space, rng.uniform(0.5, 2.0, space.mesh.num_triangles))
    for _ in range(5):
        u = rng.standard_normal(space.dof_count)
        assert float(u @ (K @ u)) >= 0.0


def test_stiffness_rejects_bad_weights():
    space = _space(1, P1)
    with pytest.raises(AssemblyError):
        assemble_weighted_stiffness(space, np.ones(3))
    weights = np.ones(space.mesh.num_triangles)
    weights[0] = 0.0
    with pytest.raises(AssemblyError):
        assemble_weighted_stiffness(space, weights)


@pytest.mark.parametrize("kind", [P1, CR])
def test_element_gradient_affine(kind):
    space = _space(2, kind)
    u = nodal_interpolate(space, lambda x, y: 2.0 * x + 3.0 * y)
    grads = element_gradients(space, u)
    assert np.allclose(grads, [2.0, 3.0], atol=1e-12)
    assert np.allclose(element_gradient(space, u, 5), [2.0, 3.0], atol=1e-12)
    constant = nodal_interpolate(space, lambda x, y: np.full_like(x, 0.3))
    assert np.allclose(element_gradient(space, constant, 0), 0.0, atol=1e-13)


@pytest.mark.parametrize("kind", [P1, CR])
def test_project_p0(kind):
    space = _space(2, kind)
    mesh = space.mesh
    u = nodal_interpolate(space, lambda x, y: x)
    barycenters = mesh.vertices[mesh.triangles].mean(axis=1)
    assert np.allclose(project_p0(space, u), barycenters[:, 0])

    rng = np.random.default_rng(2)
    w = State(space, rng.standard_normal(space.dof_count))
    integral = float(np.ones(space.dof_count) @ (space.mass_matrix @ w.coefficients))
    assert abs(float(np.sum(mesh.areas * project_p0(space, w))) - integral) < 1e-12


@pytest.mark.parametrize("kind", [P1, CR])
def test_l2_project_idempotent(kind):
    space = _space(3, kind)
    rng = np.random.default_rng(3)
    coeffs = rng.standard_normal(space.dof_count)
    coeffs[space.constrained] = 0.0
    u = State(space, coeffs)
    projected = l2_project(space, u)
    assert np.max(np.abs(projected.coefficients - coeffs)) < 1e-10
    assert projected.is_constrained()


def test_l2_project_zero():
    space = _space(2, P1)
    projected = l2_project(space, lambda x, y: np.zeros_like(x))
    assert np.all(projected.coefficients == 0.0)


def test_projection_stability_sine():
    """sin(πx)sin(πy)：‖∇P_h f‖ ≤ 2‖∇f‖，‖∇f‖ = π/√2。"""
    exact = np.pi / np.sqrt(2.0)
    for level in (2, 3, 4):
        space = _space(level, P1)
        projected = l2_project(space, lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y), quadrature=7)
        ratio = h1_seminorm(space, projected) / exact
        assert 0.5 < ratio <= 2.0


def test_evaluate_and_transfer():
    coarse = _space(2, P1)
    fine = _space(3, P1)
    rng = np.random.default_rng(4)
    u = State(coarse, rng.standard_normal(coarse.dof_count))
    moved = transfer(u, fine)
    points = rng.random((100, 2))
    # criss-cross 网格逐层嵌套，P1 函数在细网格上精确表示
    assert np.allclose(evaluate(fine, moved, points), evaluate(coarse, u, points), atol=1e-12)

    affine = nodal_interpolate(fine, lambda x, y: 1.0 - x + 0.5 * y)
    assert np.allclose(evaluate(fine, affine, points), 1.0 - points[:, 0] + 0.5 * points[:, 1])


def test_square_indicator_tv_band():
    """居中正方形示性函数的节点插值：TV 落在 (1+√2) ± 10h 内。"""
    for level in (4, 5, 6):
        space = _space(level, P1)
        h = space.mesh.h
        u = nodal_interpolate(space, lambda x, y: ((x >= 0.25) & (x <= 0.75) & (y >= 0.25) & (y <= 0.75)).astype(float))
        tv = tv_value(space, u)
        target = 1.0 + np.sqrt(2.0)
        assert target - 10 * h <= tv <= target + 10 * h


def _barycentric(mesh, tri, point):
    a, b, c = mesh.vertices[mesh.triangles[tri]]
    T = np.column_stack([b - a, c - a])
    l1, l2 = np.linalg.solve(T, point - a)
    return np.array([1.0 - l1 - l2, l1, l2])


def test_cr_continuous_at_edge_midpoints():
    """CR 函数在内部边中点处两侧取值一致。"""
    space = _space(3, CR)
    mesh = space.mesh
    rng = np.random.default_rng(4)
    u = rng.standard_normal(space.dof_count)
    midpoints, boundary = edge_barycenters(mesh)
    jumps = []
    for e in np.flatnonzero(~boundary):
        tris = np.flatnonzero(np.any(mesh.tri_edges == e, axis=1))
        assert tris.size == 2
        values = [evaluate_in(space, u, np.array([t]), _barycentric(mesh, t, midpoints[e])[None, :])[0] for t in tris]
        jumps.append(abs(values[0] - values[1]))
    assert len(jumps) == space.num_free
    assert max(jumps) < 1e-12


def test_state_length_checked():
    space = _space(1, P1)
    with pytest.raises(AssemblyError):
        State(space, np.zeros(space.dof_count + 1))
    with pytest.raises(AssemblyError):
        make_space(space.mesh, "q2")


if __name__ == "__main__":
    test_free_dof_counts_level1()
