"""
隐式格式测试：不动点迭代、能量不等式余量、确定性
"""

import pathlib
import sys

# 添加项目根目录到路径
project_root = pathlib.Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

import numpy as np
import pytest
from scipy.optimize import minimize

from core.clock import TimeGrid
from core.fespace import P1, CR, assemble_weighted_stiffness, make_space, nodal_interpolate
from core.functionals import j_eps
from core.mesh import build_crisscross
from core.noise import MULTIPLICATIVE, ZERO, NoiseModel
from core.scheme import (
    SchemeParams,
    TrajectoryError,
    check_energy_inequality,
    run_trajectory,
    scheme_residual,
    trajectory_slack_terms,
    tv_weights,
)


def _bump(x, y):
    return np.sin(np.pi * x) * np.sin(np.pi * y)


def _params(steps=10, **kwargs):
    defaults = dict(epsilon=1e-2, lam=10.0, fixed_point_tol=1e-10, max_fixed_point_iter=500)
    defaults.update(kwargs)
    return SchemeParams(grid=TimeGrid(0.1, steps), **defaults)


def _setup(kind=P1, level=2):
    space = make_space(build_crisscross(level), kind)
    g_h = nodal_interpolate(space, lambda x, y: 0.5 * ((x > 0.25) & (x < 0.75)).astype(float))
    return space, g_h


def test_zero_state_is_stationary():
    """x⁰ = 0、g = 0、零噪声：X^i 恒为 0。"""
    space, _ = _setup()
    traj = run_trajectory(space, space.zero(), space.zero(), NoiseModel(operator=ZERO), _params(steps=5))
    assert traj.N == 5
    for state in traj.states:
        assert np.all(state.coefficients == 0.0)
    print("[OK] 零状态保持不变")


def test_no_steps():
    space, g_h = _setup()
    params = SchemeParams(grid=TimeGrid(0.1, 0))
    traj = run_trajectory(space, _bump, g_h, NoiseModel(), params)
    assert traj.N == 0
    assert len(traj.increments) == 0 and len(traj.reports) == 0
    assert check_energy_inequality(traj).shape == (0,)


def test_trajectory_is_deterministic():
    space, g_h = _setup()
    model = NoiseModel(sigma=0.5, seed=99)
    a = run_trajectory(space, _bump, g_h, model, _params())
    b = run_trajectory(space, _bump, g_h, model, _params())
    assert np.array_equal(a.coefficient_matrix(), b.coefficient_matrix())
    c = run_trajectory(space, _bump, g_h, model.with_seed(100), _params())
    assert not np.array_equal(a.coefficient_matrix(), c.coefficient_matrix())


@pytest.mark.parametrize("kind", [P1, CR])
@pytest.mark.parametrize("operator", ["additive", MULTIPLICATIVE])
def test_energy_slack_nonnegative(kind, operator):
    """每一步的能量不等式余量 ≥ -1e-6·(1 + max‖X^i‖²)。"""
    space, g_h = _setup(kind)
    model = NoiseModel(operator=operator, sigma=1.0, seed=5)
    traj = run_trajectory(space, _bump, g_h, model, _params())
    slack = check_energy_inequality(traj)
    M = space.mass_matrix
    max_sq = max(float(s.coefficients @ (M @ s.coefficients)) for s in traj.states)
    assert np.all(slack >= -1e-6 * (1.0 + max_sq))
    reported = np.array([r.energy_slack for r in traj.reports])
    assert np.allclose(reported, slack, rtol=0, atol=1e-12 * (1.0 + max_sq))

    terms = trajectory_slack_terms(traj)
    assert len(terms) == traj.N
    assert abs(terms[0].slack - slack[0]) < 1e-14 * (1.0 + max_sq)
    assert terms[0].tau == traj.params.tau


def test_zero_noise_energy_monotone():
    """零噪声时 J_ε(X^i) 单调不增（包括 X⁰）。"""
    space, g_h = _setup()
    params = _params(steps=8)
    traj = run_trajectory(space, _bump, g_h, NoiseModel(operator=ZERO), params)
    values = [j_eps(space, s, g_h, params.epsilon, params.lam) for s in traj.states]
    scale = 1.0 + max(values)
    assert np.all(np.diff(values) <= 1e-9 * scale)


def test_converged_step_residual_small():
    space, g_h = _setup()
    model = NoiseModel(sigma=0.5, seed=3)
    params = _params(steps=4)
    traj = run_trajectory(space, _bump, g_h, model, params)
    fields = traj.noise_fields()
    for i in range(1, traj.N + 1):
        r = scheme_residual(space, traj.states[i - 1], traj.states[i], fields[i - 1], g_h, params)
        assert np.max(np.abs(r)) < 1e-6
        assert np.all(r[space.constrained] == 0.0)
        assert traj.states[i].is_constrained()


@pytest.mark.parametrize("kind", [P1, CR])
def test_direct_and_cg_agree(kind):
    """内层线性求解换成 cg 后轨迹在 L² 中几乎不变。"""
    space, g_h = _setup(kind)
    model = NoiseModel(sigma=0.5, seed=8)
    direct = run_trajectory(space, _bump, g_h, model, _params(steps=6, fixed_point_tol=1e-8))
    cg = run_trajectory(space, _bump, g_h, model, _params(steps=6, fixed_point_tol=1e-8, linear_solver="cg", linear_tol=1e-12))
    diff = direct.coefficient_matrix() - cg.coefficient_matrix()
    M = space.mass_matrix
    worst = max(float(np.sqrt(d @ (M @ d))) for d in diff)
    assert worst < 1e-4


def test_single_step_minimizes_energy():
    """零噪声单步：X¹ 是 ½‖y-X⁰‖²_M + τJ_ε(y) 在 5 个自由度上的极小点。"""
    space, g_h = _setup(P1, level=1)
    assert space.num_free == 5
    params = SchemeParams(grid=TimeGrid(0.1, 1), epsilon=0.1, lam=10.0, fixed_point_tol=1e-12, max_fixed_point_iter=2000)
    traj = run_trajectory(space, _bump, g_h, NoiseModel(operator=ZERO), params)
    x = traj.states[0].coefficients
    M = space.mass_matrix
    free = space.free_dofs
    tau = params.tau

    def lift(z):
        y = np.zeros(space.dof_count)
        y[free] = z
        return y

    def objective(z):
        y = lift(z)
        d = y - x
        return 0.5 * float(d @ (M @ d)) + tau * j_eps(space, y, g_h, params.epsilon, params.lam)

    def gradient(z):
        y = lift(z)
        K = assemble_weighted_stiffness(space, tv_weights(space, y, params.epsilon), constrained=False)
        full = M @ (y - x) + tau * (K @ y + params.lam * (M @ (y - g_h.coefficients)))
        return full[free]

    result = minimize(objective, x[free], jac=gradient, method="BFGS", options={"gtol": 1e-12, "maxiter": 1000})
    step = traj.states[1].coefficients
    assert np.max(np.abs(step[free] - result.x)) < 1e-6
    assert objective(step[free]) <= result.fun + 1e-12
    assert np.all(step[space.constrained] == 0.0)


def test_tightened_params():
    params = _params()
    tight = params.tightened()
    assert tight.fixed_point_tol == pytest.approx(params.fixed_point_tol / 10.0)
    assert tight.max_fixed_point_iter == 2 * params.max_fixed_point_iter
    assert tight.N == params.N and tight.tau == params.tau


def test_divergence_reports_step_index():
    space, g_h = _setup()
    params = _params(steps=3, fixed_point_tol=1e-14, max_fixed_point_iter=1)
    with pytest.raises(TrajectoryError) as info:
        run_trajectory(space, _bump, g_h, NoiseModel(sigma=0.5, seed=1), params)
    assert info.value.index == 1


def test_invalid_params():
    grid = TimeGrid(0.1, 10)
    with pytest.raises(ValueError):
        SchemeParams(grid=grid, epsilon=0.0)
    with pytest.raises(ValueError):
        SchemeParams(grid=grid, lam=-1.0)
    with pytest.raises(ValueError):
        SchemeParams(grid=grid, linear_solver="lu")


def test_time_grid():
    grid = TimeGrid.from_tau(0.1, 0.001)
    assert grid.steps == 100
    assert grid.time(100) == pytest.approx(0.1)
    assert grid.refine(2).steps == 200
    with pytest.raises(ValueError):
        TimeGrid.from_tau(0.1, 0.03)
    with pytest.raises(IndexError):
        grid.time(101)


if __name__ == "__main__":
    test_zero_state_is_stationary()
