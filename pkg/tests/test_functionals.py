"""
标量泛函测试：能量、H⁻¹ 范数、时间插值、连续模、Besov 上界
"""

import pathlib
import sys

# 添加项目根目录到路径
project_root = pathlib.Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

import numpy as np
import pytest

from core.clock import TimeGrid
from core.fespace import CR, P1, State, make_space, nodal_interpolate
from core.functionals import (
    LEFT_CONSTANT,
    LINEAR,
    RIGHT_CONSTANT,
    FunctionalError,
    PathInterpolant,
    besov_seminorm,
    boundary_trace_value,
    discrete_lr_norm,
    dual_tv_lower_bound,
    energy,
    evaluate_interpolant,
    first_dirichlet_eigenpair,
    hminus1_norm,
    j_eps,
    j_eps_zero,
    modulus_of_continuity,
    p0_distance_squared,
    poincare_constant,
    tv_value,
)
from core.mesh import build_crisscross


def _space(level=3, kind=P1):
    return make_space(build_crisscross(level), kind)


def test_j_eps_zero_state():
    """J_ε(0) = ε|O|（g = 0），保真项为 0。"""
    space = _space()
    assert j_eps_zero(space, None, 1e-4, 200.0) == pytest.approx(1e-4, rel=1e-12)
    parts = energy(space, space.zero(), None, epsilon=1e-4, lam=200.0)
    assert parts.fidelity == 0.0
    assert parts.tv == 0.0
    assert parts.total_Jeps == pytest.approx(1e-4, rel=1e-12)
    print("[OK] J_ε(0) = ε")


def test_fidelity_against_data():
    space = _space()
    g = nodal_interpolate(space, lambda x, y: x * y)
    assert j_eps(space, g, g, 1e-4, 200.0) == pytest.approx(j_eps(space, g, None, 1e-4, 0.0))
    parts = energy(space, space.zero(), g, epsilon=1e-4, lam=2.0)
    sq = float(g.coefficients @ (space.mass_matrix @ g.coefficients))
    assert parts.fidelity == pytest.approx(sq)


def test_energy_affine():
    """u = 2x + 3y：tv = √13，边界项为各边上 |u| 的积分。"""
    space = _space(2)
    u = nodal_interpolate(space, lambda x, y: 2.0 * x + 3.0 * y)
    parts = energy(space, u, None, epsilon=1e-3, lam=0.0)
    assert parts.tv == pytest.approx(np.sqrt(13.0), rel=1e-12)
    assert parts.tv_eps == pytest.approx(np.sqrt(13.0 + 1e-6), rel=1e-12)
    # 四条边：y=0 → 1，x=0 → 1.5，y=1 → 4，x=1 → 3.5
    assert parts.boundary_term == pytest.approx(10.0, rel=1e-12)
    assert parts.total_J == pytest.approx(parts.tv + parts.boundary_term)


def test_boundary_trace_sign_change():
    """迹在边内变号时按分段精确积分。"""
    space = _space(1)
    u = nodal_interpolate(space, lambda x, y: x - 0.3)
    # y=0 与 y=1 两条边各 ∫|x-0.3| = 0.29，x=0 边 0.3，x=1 边 0.7
    assert boundary_trace_value(space, u) == pytest.approx(0.29 * 2 + 0.3 + 0.7, rel=1e-12)


def test_tv_homogeneity():
    space = _space(3, CR)
    rng = np.random.default_rng(0)
    u = State(space, rng.standard_normal(space.dof_count))
    base = tv_value(space, u)
    assert tv_value(space, State(space, -3.0 * u.coefficients)) == pytest.approx(3.0 * base)


def test_dual_lower_bound_below_tv():
    space = _space(4)
    u = nodal_interpolate(space, lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y), constrain=True)
    lower = dual_tv_lower_bound(space, u)
    tv = tv_value(space, u)
    assert lower <= tv + 1e-12
    assert lower > 0.9 * tv
    with pytest.raises(FunctionalError):
        dual_tv_lower_bound(_space(2, CR), _space(2, CR).zero())


def test_hminus1_first_eigenfunction():
    """第一特征函数 v（M 正交归一）：‖v‖²_{-1,h} = 1/λ₁,h，且 C_P = 1/√λ₁,h。"""
    space = _space(3)
    lam1, v = first_dirichlet_eigenpair(space)
    assert abs(lam1 - 2.0 * np.pi**2) < 0.1 * 2.0 * np.pi**2
    assert hminus1_norm(space, v) ** 2 == pytest.approx(1.0 / lam1, rel=1e-8)
    assert poincare_constant(space) == pytest.approx(1.0 / np.sqrt(lam1), rel=1e-8)


def test_hminus1_bounded_by_poincare():
    space = _space(3, CR)
    rng = np.random.default_rng(1)
    coeffs = rng.standard_normal(space.dof_count)
    coeffs[space.constrained] = 0.0
    l2 = float(np.sqrt(coeffs @ (space.mass_matrix @ coeffs)))
    assert hminus1_norm(space, coeffs) <= poincare_constant(space) * l2 * (1.0 + 1e-10)
    assert hminus1_norm(space, space.zero()) == 0.0


def _interpolant(kind):
    space = _space(2)
    grid = TimeGrid(1, 4)
    rng = np.random.default_rng(2)
    states = rng.standard_normal((5, space.dof_count))
    return PathInterpolant(space, grid, states, kind)


def test_interpolants_at_nodes_and_midpoints():
    linear = _interpolant(LINEAR)
    right = PathInterpolant(linear.space, linear.grid, linear.states, RIGHT_CONSTANT)
    left = PathInterpolant(linear.space, linear.grid, linear.states, LEFT_CONSTANT)
    X = linear.states
    for i in range(5):
        t = 0.25 * i
        for interp in (linear, right, left):
            assert np.array_equal(evaluate_interpolant(interp, t).coefficients, X[i])
    mid = 0.375
    assert np.allclose(evaluate_interpolant(linear, mid).coefficients, 0.5 * (X[1] + X[2]))
    assert np.array_equal(evaluate_interpolant(right, mid).coefficients, X[2])
    assert np.array_equal(evaluate_interpolant(left, mid).coefficients, X[1])
    with pytest.raises(FunctionalError):
        evaluate_interpolant(linear, 1.5)
    with pytest.raises(FunctionalError):
        PathInterpolant(linear.space, linear.grid, X[:3], LINEAR)


def test_modulus_of_continuity():
    interp = _interpolant(LINEAR)
    small = modulus_of_continuity(interp, 0.1)
    large = modulus_of_continuity(interp, 1.0)
    assert 0.0 < small <= large
    X = interp.states
    assert large >= hminus1_norm(interp.space, X[4] - X[0]) * (1.0 - 1e-9)
    constant = PathInterpolant(interp.space, interp.grid, np.tile(X[0], (5, 1)), LINEAR)
    assert modulus_of_continuity(constant, 0.5) == pytest.approx(0.0, abs=1e-6)
    with pytest.raises(FunctionalError):
        modulus_of_continuity(interp, 0.0)


def test_modulus_below_half_step():
    """δ < τ/2：单个凸起 X² = b，线性插值 m(δ) = (δ/τ)‖b‖，分段常数为整个跳跃 ‖b‖。"""
    space = _space(2)
    grid = TimeGrid(1, 4)
    bump = nodal_interpolate(space, lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y)).coefficients
    states = np.zeros((5, space.dof_count))
    states[2] = bump
    size = hminus1_norm(space, bump)

    linear = PathInterpolant(space, grid, states, LINEAR)
    assert modulus_of_continuity(linear, 0.1) == pytest.approx(0.4 * size, rel=1e-6)
    assert modulus_of_continuity(linear, 0.25) == pytest.approx(size, rel=1e-6)
    assert modulus_of_continuity(linear, 0.6) == pytest.approx(size, rel=1e-6)
    for kind in (RIGHT_CONSTANT, LEFT_CONSTANT):
        path = PathInterpolant(space, grid, states, kind)
        assert modulus_of_continuity(path, 0.01) == pytest.approx(size, rel=1e-6)


def test_modulus_piecewise_constant_reach():
    """X^i = i·b：δ = τ 只跨一个跳跃，δ = 1.2τ 可跨两个。"""
    space = _space(2)
    grid = TimeGrid(1, 4)
    b = nodal_interpolate(space, lambda x, y: x * (1.0 - x) * y * (1.0 - y)).coefficients
    states = np.arange(5)[:, None] * b[None, :]
    size = hminus1_norm(space, b)
    path = PathInterpolant(space, grid, states, RIGHT_CONSTANT)
    assert modulus_of_continuity(path, 0.25) == pytest.approx(size, rel=1e-6)
    assert modulus_of_continuity(path, 0.3) == pytest.approx(2.0 * size, rel=1e-6)
    assert modulus_of_continuity(PathInterpolant(space, grid, states, LINEAR), 0.3) == pytest.approx(1.2 * size, rel=1e-6)


def test_besov_seminorm():
    tau = 0.01
    constant = np.ones(101)
    assert besov_seminorm(constant, tau, 0.5, 2.0, 2.0) == 0.0
    line = tau * np.arange(101)
    value = besov_seminorm(line, tau, 0.5, 2.0, 2.0)
    assert value > 0.0
    assert besov_seminorm(2.0 * line, tau, 0.5, 2.0, 2.0) == pytest.approx(2.0 * value)
    assert besov_seminorm(line, tau, 0.5, 2.0, np.inf) > 0.0
    assert besov_seminorm(line[:2], tau, 0.5, 2.0, 2.0) == 0.0
    with pytest.raises(FunctionalError):
        besov_seminorm(line, tau, 1.0, 2.0, 2.0)
    with pytest.raises(FunctionalError):
        besov_seminorm(line, tau, 0.5, 0.5, 2.0)


def test_discrete_lr_norm():
    values = np.array([0.0, 1.0, -2.0])
    assert discrete_lr_norm(values, 0.5, np.inf) == 2.0
    assert discrete_lr_norm(values, 0.5, 1.0) == pytest.approx(1.5)


def test_p0_distance():
    space = _space(2)
    w = nodal_interpolate(space, lambda x, y: np.full_like(x, 2.0))
    assert p0_distance_squared(space, np.full(space.mesh.num_triangles, 2.0), w) == pytest.approx(0.0, abs=1e-14)
    assert p0_distance_squared(space, np.zeros(space.mesh.num_triangles), w) == pytest.approx(4.0)
    with pytest.raises(FunctionalError):
        p0_distance_squared(space, np.zeros(3), w)


if __name__ == "__main__":
    test_j_eps_zero_state()
