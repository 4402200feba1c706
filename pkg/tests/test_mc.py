"""
Monte Carlo 驱动测试：归约、可复现性、增量标度
"""

import pathlib
import sys

# 添加项目根目录到路径
project_root = pathlib.Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

import numpy as np
import pytest

import core.mc as mc_module
from core.clock import TimeGrid
from core.fespace import P1, make_space
from core.mc import (
    MEAN,
    QUANTILE,
    SECOND_MOMENT,
    SUP_THEN_MEAN,
    McPlan,
    ObservableCollector,
    ObservableSpec,
    RealizationError,
    Scenario,
    bootstrap_slope_ci,
    energy_moment_study,
    increment_scaling_study,
    loglog_slope,
    mc_summary_rows,
    nearest_rank,
    reduce_observable,
    run_mc,
    run_realizations,
)
from core.mesh import build_crisscross
from core.noise import GAUSSIAN, RADEMACHER, ZERO, NoiseModel
from core.scheme import SchemeParams


def _scenario(model=None, steps=8, level=2, **kwargs):
    space = make_space(build_crisscross(level), P1)
    kwargs.setdefault("epsilon", 1e-2)
    params = SchemeParams(grid=TimeGrid(0.1, steps), **kwargs)
    return Scenario(space=space, x0=space.zero(), g_h=space.zero(), model=model or NoiseModel(sigma=0.5), params=params)


def test_nearest_rank():
    values = np.array([5.0, 1.0, 3.0, 2.0, 4.0])
    assert nearest_rank(values, 0.5) == 3.0
    assert nearest_rank(values, 1.0) == 5.0
    assert nearest_rank(values, 0.01) == 1.0
    print("[OK] 最近秩分位数")


def test_reductions():
    spec = ObservableSpec("x", MEAN)
    summary, samples = reduce_observable(spec, [1.0, 2.0, 3.0])
    assert summary.estimate == 2.0
    assert summary.stderr == pytest.approx(1.0 / np.sqrt(3.0))
    assert summary.stderr_defined

    summary, _ = reduce_observable(ObservableSpec("x", SECOND_MOMENT), [1.0, -3.0])
    assert summary.estimate == 5.0

    paths = [np.array([0.0, 2.0, 1.0]), np.array([0.0, 4.0, 3.0])]
    summary, samples = reduce_observable(ObservableSpec("x", SUP_THEN_MEAN), paths)
    assert summary.estimate == 3.0
    assert list(samples) == [2.0, 4.0]

    summary, _ = reduce_observable(ObservableSpec("x", QUANTILE, 0.5), [3.0, 1.0, 2.0])
    assert summary.estimate == 2.0
    assert not summary.stderr_defined

    with pytest.raises(ValueError):
        ObservableSpec("x", "median")


def test_single_realization_stderr_nan():
    plan = McPlan(realizations=1, base_seed=3, observables=(ObservableSpec("final_sq_norm"),))
    summary = run_mc(plan, _scenario())
    entry = summary.entries["final_sq_norm:mean"]
    assert np.isnan(entry.stderr)
    assert not entry.stderr_defined
    rows = mc_summary_rows(summary)
    assert rows[0]["observable"] == "final_sq_norm"
    assert rows[0]["stderr_defined"] is False


def test_zero_noise_stderr_zero():
    plan = McPlan(realizations=4, observables=(ObservableSpec("final_sq_norm"), ObservableSpec("final_j_eps")))
    summary = run_mc(plan, _scenario(NoiseModel(operator=ZERO)))
    assert summary.stderr("final_sq_norm:mean") == 0.0
    assert summary.estimate("final_sq_norm:mean") == 0.0
    assert summary.stderr("final_j_eps:mean") == 0.0


def test_worker_count_invariance():
    """workers = 1 与 workers = 2 的结果逐位相同。"""
    specs = (ObservableSpec("final_sq_norm"), ObservableSpec("sq_norm_path", SUP_THEN_MEAN))
    scenario = _scenario(steps=6)
    serial = run_mc(McPlan(realizations=4, base_seed=17, observables=specs, workers=1), scenario)
    parallel = run_mc(McPlan(realizations=4, base_seed=17, observables=specs, workers=2), scenario)
    for label in serial.entries:
        assert serial.estimate(label) == parallel.estimate(label)
        assert np.array_equal(serial.raw[label], parallel.raw[label])


def test_rademacher_matches_gaussian_moment():
    """两种增量分布下 E‖X^N‖² 的估计在合并标准误之内一致。"""
    plan = McPlan(realizations=64, base_seed=5, observables=(ObservableSpec("final_sq_norm"),))
    label = "final_sq_norm:mean"
    results = []
    for kind in (RADEMACHER, GAUSSIAN):
        model = NoiseModel(kind=kind, sigma=0.5)
        results.append(run_mc(plan, _scenario(model, epsilon=1.0, lam=0.0)))
    rademacher, gaussian = results
    combined = np.hypot(rademacher.stderr(label), gaussian.stderr(label))
    assert combined > 0.0
    assert abs(rademacher.estimate(label) - gaussian.estimate(label)) <= 4.0 * combined


def test_stderr_shrinks_with_realizations():
    """标准误为样本标准差 / √M，M 增大 4 倍时大约减半。"""
    label = "final_sq_norm:mean"
    specs = (ObservableSpec("final_sq_norm"),)
    scenario = _scenario(epsilon=1.0)
    small = run_mc(McPlan(realizations=16, base_seed=9, observables=specs), scenario)
    large = run_mc(McPlan(realizations=64, base_seed=9, observables=specs), scenario)
    for summary, m in ((small, 16), (large, 64)):
        raw = np.asarray(summary.raw[label], dtype=float)
        assert summary.stderr(label) == pytest.approx(np.std(raw, ddof=1) / np.sqrt(m), rel=1e-12)
    ratio = small.stderr(label) / large.stderr(label)
    assert 1.2 <= ratio <= 3.4


def test_unknown_observable():
    with pytest.raises(ValueError):
        ObservableCollector(["no_such_observable"])


def _failing_collector(traj):
    raise RuntimeError("boom")


def test_realization_error_carries_index():
    with pytest.raises(RealizationError) as info:
        run_realizations(_scenario(steps=2), 3, 0, _failing_collector, workers=1)
    assert info.value.index == 0
    assert "boom" in info.value.cause


def test_invalid_plan():
    with pytest.raises(ValueError):
        McPlan(realizations=0)
    with pytest.raises(ValueError):
        McPlan(realizations=2, workers=0)


def test_loglog_slope():
    x = np.array([1.0, 2.0, 4.0, 8.0])
    assert loglog_slope(x, 3.0 * x**2) == pytest.approx(2.0)
    assert np.isnan(loglog_slope(x, np.array([1.0, 0.0, 1.0, 1.0])))
    samples = [np.full(5, 3.0 * t**2) for t in x]
    lo, hi = bootstrap_slope_ci(x, samples, resamples=50, seed=1)
    assert lo == pytest.approx(2.0) and hi == pytest.approx(2.0)


def test_increment_scaling_slope():
    """λ = 0、ε = 10、level 2、N = 64：四阶 H⁻¹ 增量矩的斜率 ≥ 1.7。"""
    scenario = _scenario(NoiseModel(sigma=1.0), steps=64, level=2, epsilon=10.0, lam=0.0)
    result = increment_scaling_study(scenario, lags=(1, 2, 4, 8), realizations=16, base_seed=7, bootstrap=100)
    assert not result.degenerate
    assert result.slope >= 1.7
    assert np.isfinite(result.ci[0]) and np.isfinite(result.ci[1])
    assert result.times == pytest.approx([0.1 / 64 * lag for lag in (1, 2, 4, 8)])


def _fake_aggregates(growth):
    """替换 run_realizations：A = N^growth·(1 + 0.01k)，k 为实现编号。"""

    def fake(scenario, realizations, base_seed, collector, workers=1):
        N = scenario.params.grid.steps
        return [{"energy_aggregate": float(N) ** growth * (1.0 + 0.01 * k)} for k in range(realizations)]

    return fake


def test_energy_moment_growth_is_flagged(monkeypatch):
    """E[A²] 随 N 按 N² 增长：斜率为正，判定不通过。"""
    monkeypatch.setattr(mc_module, "run_realizations", _fake_aggregates(1.0))
    result = energy_moment_study(_scenario(), step_counts=(10, 20, 40, 80), realizations=8, bootstrap=100)
    assert result.slope == pytest.approx(2.0, abs=1e-3)
    assert result.ci[0] > 1.9
    assert result.bounded() is False


def test_energy_moment_flat_passes(monkeypatch):
    monkeypatch.setattr(mc_module, "run_realizations", _fake_aggregates(0.0))
    result = energy_moment_study(_scenario(), step_counts=(10, 20, 40, 80), realizations=8, bootstrap=100)
    assert abs(result.slope) < 1e-9
    assert result.ci[0] <= 0.0 <= result.ci[1]
    assert result.bounded() is True
    assert result.steps == [10, 20, 40, 80]
    assert result.taus == pytest.approx([0.01, 0.005, 0.0025, 0.00125])


def test_increment_scaling_degenerate():
    scenario = _scenario(NoiseModel(operator=ZERO), steps=16)
    result = increment_scaling_study(scenario, lags=(1, 2), realizations=2)
    assert result.degenerate
    assert np.isnan(result.slope)
    with pytest.raises(ValueError):
        increment_scaling_study(scenario, lags=(1, 16), realizations=2)


if __name__ == "__main__":
    test_nearest_rank()
