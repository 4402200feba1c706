"""
Monte Carlo 驱动与统计

- 各次实现的种子为 seed ⊕ splitmix64(r)，两两不同。
- 实现可以在多个进程中并行计算（ProcessPoolExecutor，worker 通过 initializer
  共享只读的场景数据），结果按实现编号顺序缓存后再归约，
  因此结果与执行顺序、worker 数量无关，逐位可复现。
- 观测量通过 InstanceRegistry 按名称注册。
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from utils.logger import get_logger

from .clock import TimeGrid
from .fespace import FeSpace, State
from .functionals import gram_distances, hminus1_gram, j_eps
from .instance import InstanceRegistry
from .noise import NoiseModel, realization_seed
from .scheme import SchemeParams, Trajectory, check_energy_inequality, run_trajectory


logger = get_logger()

MEAN = "mean"
SECOND_MOMENT = "second_moment"
SUP_THEN_MEAN = "sup_then_mean"
QUANTILE = "quantile"
REDUCTIONS = (MEAN, SECOND_MOMENT, SUP_THEN_MEAN, QUANTILE)

DEFAULT_BOOTSTRAP = 400
DEFAULT_LAGS = (1, 2, 4, 8, 16)


class RealizationError(RuntimeError):
    """某次实现失败；index 为实现编号。"""

    def __init__(self, index: int, cause: str) -> None:
        super().__init__(f"第 {index} 次实现失败: {cause}")
        self.index = index
        self.cause = cause

    def __reduce__(self):
        return (self.__class__, (self.index, self.cause))


# ---- 场景与计划 ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Scenario:
    """
    一组完整的格式配置（不含种子），所有实现共享。

    Attributes:
        space: 解空间。
        x0: 初值（投影前）。
        g_h: 解空间中的数据。
        model: 噪声模型，种子按实现替换。
        params: 格式参数。
        quadrature: 初值投影的求积点数。
    """

    space: FeSpace
    x0: State
    g_h: State
    model: NoiseModel
    params: SchemeParams
    quadrature: int = 3

    def run(self, seed: int) -> Trajectory:
        return run_trajectory(self.space, self.x0, self.g_h, self.model.with_seed(seed), self.params, self.quadrature)

    def with_grid(self, grid: TimeGrid) -> "Scenario":
        return replace(self, params=replace(self.params, grid=grid))

    def with_model(self, model: NoiseModel) -> "Scenario":
        return replace(self, model=model)

    def with_params(self, params: SchemeParams) -> "Scenario":
        return replace(self, params=params)


@dataclass(frozen=True)
class ObservableSpec:
    """观测量名称与归约方式。quantile 只对 "quantile" 归约有效。"""

    name: str
    reduction: str = MEAN
    quantile: float = 0.5

    def __post_init__(self) -> None:
        if self.reduction not in REDUCTIONS:
            raise ValueError(f"未知的归约方式: {self.reduction}（可选 {', '.join(REDUCTIONS)}）")
        if not 0.0 < self.quantile <= 1.0:
            raise ValueError(f"分位数必须在 (0, 1] 内, got {self.quantile}")

    @property
    def label(self) -> str:
        if self.reduction == QUANTILE:
            return f"{self.name}:{self.reduction}:{self.quantile:g}"
        return f"{self.name}:{self.reduction}"


@dataclass(frozen=True)
class McPlan:
    """
    Monte Carlo 计划。

    Attributes:
        realizations: 实现次数 M ≥ 1。
        base_seed: 基础种子。
        observables: 需要归约的观测量。
        workers: 并行进程数，1 表示在当前进程中顺序执行。
    """

    realizations: int
    base_seed: int = 0
    observables: Tuple[ObservableSpec, ...] = ()
    workers: int = 1

    def __post_init__(self) -> None:
        if self.realizations < 1:
            raise ValueError(f"实现次数必须 ≥ 1, got {self.realizations}")
        if self.workers < 1:
            raise ValueError(f"worker 数必须 ≥ 1, got {self.workers}")
        object.__setattr__(self, "observables", tuple(self.observables))

    def seeds(self) -> List[int]:
        return [realization_seed(self.base_seed, r) for r in range(self.realizations)]


@dataclass(frozen=True)
class ObservableSummary:
    name: str
    reduction: str
    estimate: float
    stderr: float
    realizations: int
    stderr_defined: bool


@dataclass
class McSummary:
    """
    Monte Carlo 汇总。

    Attributes:
        realizations: M。
        entries: {label: ObservableSummary}。
        raw: {label: 每次实现归约前的值（按实现编号排列）}。
    """

    realizations: int
    entries: Dict[str, ObservableSummary] = field(default_factory=dict)
    raw: Dict[str, np.ndarray] = field(default_factory=dict)

    def estimate(self, label: str) -> float:
        return self.entries[label].estimate

    def stderr(self, label: str) -> float:
        return self.entries[label].stderr


# ---- 观测量 -----------------------------------------------------------------


def _sq_norms(traj: Trajectory) -> np.ndarray:
    X = traj.coefficient_matrix()
    return np.einsum("ij,ij->i", X, (traj.space.mass_matrix @ X.T).T)


def final_sq_norm(traj: Trajectory) -> float:
    """‖X^N‖²。"""
    return float(_sq_norms(traj)[-1])


def sq_norm_path(traj: Trajectory) -> np.ndarray:
    """‖X^i‖²，i = 0..N。"""
    return _sq_norms(traj)


def final_j_eps(traj: Trajectory) -> float:
    p = traj.params
    return j_eps(traj.space, traj.states[-1], traj.g_h, p.epsilon, p.lam)


def final_fidelity(traj: Trajectory) -> float:
    diff = traj.states[-1].coefficients - traj.g_h.coefficients
    return float(0.5 * traj.params.lam * (diff @ (traj.space.mass_matrix @ diff)))


def min_energy_slack(traj: Trajectory) -> float:
    slacks = check_energy_inequality(traj)
    return float(np.min(slacks)) if slacks.size else 0.0


def energy_aggregate(traj: Trajectory) -> float:
    """½ sup_i‖X^i‖² + Σ_i (¼‖X^i - X^{i-1}‖² + τ J_ε(X^i))。"""
    p = traj.params
    M = traj.space.mass_matrix
    X = traj.coefficient_matrix()
    total = 0.5 * float(np.max(_sq_norms(traj)))
    for i in range(1, X.shape[0]):
        d = X[i] - X[i - 1]
        total += 0.25 * float(d @ (M @ d)) + p.tau * j_eps(traj.space, X[i], traj.g_h, p.epsilon, p.lam)
    return total


def max_fixed_point_iterations(traj: Trajectory) -> float:
    return float(max((r.iterations for r in traj.reports), default=0))


for _name, _func in {
    "final_sq_norm": final_sq_norm,
    "sq_norm_path": sq_norm_path,
    "final_j_eps": final_j_eps,
    "final_fidelity": final_fidelity,
    "min_energy_slack": min_energy_slack,
    "energy_aggregate": energy_aggregate,
    "max_fixed_point_iterations": max_fixed_point_iterations,
}.items():
    InstanceRegistry.register_observable(_name, _func)


class ObservableCollector:
    """按名称计算一组观测量，返回 {name: value}。"""

    def __init__(self, names: Sequence[str]) -> None:
        missing = [n for n in names if InstanceRegistry.get_observable(n) is None]
        if missing:
            raise ValueError(f"未注册的观测量: {missing}，已注册: {InstanceRegistry.list_observables()}")
        self.names = list(dict.fromkeys(names))

    def __call__(self, traj: Trajectory) -> Dict[str, Any]:
        return {name: InstanceRegistry.get_observable(name)(traj) for name in self.names}


# ---- 并行执行 -----------------------------------------------------------------

_WORKER_SCENARIO: Scenario | None = None
_WORKER_COLLECTOR: Callable[[Trajectory], Any] | None = None


def _init_worker(scenario: Scenario, collector: Callable[[Trajectory], Any]) -> None:
    """worker 进程初始化：保存只读的场景与收集器。"""
    global _WORKER_SCENARIO, _WORKER_COLLECTOR
    _WORKER_SCENARIO = scenario
    _WORKER_COLLECTOR = collector


def _collect(scenario: Scenario, collector: Callable[[Trajectory], Any], index: int, seed: int) -> Any:
    try:
        return collector(scenario.run(seed))
    except Exception as exc:
        raise RealizationError(index, f"{type(exc).__name__}: {exc}") from exc


def _realization_task(task: Tuple[int, int]) -> Any:
    index, seed = task
    return _collect(_WORKER_SCENARIO, _WORKER_COLLECTOR, index, seed)


def run_realizations(
    scenario: Scenario,
    realizations: int,
    base_seed: int,
    collector: Callable[[Trajectory], Any],
    workers: int = 1,
) -> List[Any]:
    """
    运行 M 次实现，返回按实现编号排列的收集结果。

    Raises:
        RealizationError: 任一实现失败（不返回部分结果）。
    """
    tasks = [(r, realization_seed(base_seed, r)) for r in range(realizations)]
    try:
        if workers <= 1 or realizations == 1:
            return [_collect(scenario, collector, r, seed) for r, seed in tasks]
        chunksize = max(1, realizations // (4 * workers))
        with ProcessPoolExecutor(
            max_workers=workers,
            initializer=_init_worker,
            initargs=(scenario, collector),
        ) as pool:
            return list(pool.map(_realization_task, tasks, chunksize=chunksize))
    except RealizationError as exc:
        logger.error("Monte Carlo 实现失败: index=%d, cause=%s", exc.index, exc.cause, exc_info=True)
        raise


# ---- 归约 -------------------------------------------------------------------


def nearest_rank(values: np.ndarray, q: float) -> float:
    """最近秩分位数（不插值）：排序后第 ⌈qM⌉ 个值。"""
    ordered = np.sort(np.asarray(values, dtype=float))
    k = int(np.ceil(q * ordered.shape[0]))
    return float(ordered[min(max(k, 1), ordered.shape[0]) - 1])


def reduce_observable(spec: ObservableSpec, values: Sequence[Any]) -> Tuple[ObservableSummary, np.ndarray]:
    """
    归约一个观测量。标准误 = 样本标准差（ddof=1）/ √M；M = 1 时为 NaN。
    """
    if spec.reduction == SUP_THEN_MEAN:
        samples = np.array([float(np.max(v)) for v in values])
    else:
        samples = np.array([float(np.asarray(v).reshape(-1)[-1]) if np.ndim(v) else float(v) for v in values])
    if spec.reduction == SECOND_MOMENT:
        samples = samples * samples
    M = samples.shape[0]
    if spec.reduction == QUANTILE:
        estimate = nearest_rank(samples, spec.quantile)
        stderr = float("nan")
        defined = False
    else:
        estimate = float(np.mean(samples))
        defined = M >= 2
        stderr = float(np.std(samples, ddof=1) / np.sqrt(M)) if defined else float("nan")
    return ObservableSummary(spec.name, spec.reduction, estimate, stderr, M, defined), samples


def summarize_observables(specs: Sequence[ObservableSpec], results: Sequence[Dict[str, Any]]) -> McSummary:
    """把按实现编号排列的观测量字典归约为 McSummary。"""
    summary = McSummary(realizations=len(results))
    for spec in specs:
        entry, samples = reduce_observable(spec, [res[spec.name] for res in results])
        summary.entries[spec.label] = entry
        summary.raw[spec.label] = samples
    return summary


def mc_summary_rows(summary: McSummary) -> List[Dict[str, Any]]:
    """mc_summary 模板的行。"""
    return [
        {
            "observable": entry.name,
            "reduction": entry.reduction if label.count(":") < 2 else label.split(":", 1)[1],
            "estimate": entry.estimate,
            "stderr": entry.stderr,
            "realizations": entry.realizations,
            "stderr_defined": entry.stderr_defined,
        }
        for label, entry in summary.entries.items()
    ]


def run_mc(plan: McPlan, scenario: Scenario) -> McSummary:
    """
    运行 Monte Carlo 计划并归约所有观测量。

    Returns:
        McSummary，与 worker 数无关、逐位可复现。
    """
    names = [spec.name for spec in plan.observables]
    logger.info(
        "Monte Carlo 开始: M=%d, seed=%d, workers=%d, observables=%s",
        plan.realizations,
        plan.base_seed,
        plan.workers,
        names,
    )
    results = run_realizations(scenario, plan.realizations, plan.base_seed, ObservableCollector(names), plan.workers)
    summary = summarize_observables(plan.observables, results)
    logger.info("Monte Carlo 完成: M=%d", plan.realizations)
    return summary


# ---- 斜率估计 -----------------------------------------------------------------


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """log y 对 log x 的最小二乘斜率；存在非正值时返回 NaN。"""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x <= 0) or np.any(y <= 0) or x.shape[0] < 2:
        return float("nan")
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def bootstrap_slope_ci(
    x: Sequence[float],
    samples: Sequence[np.ndarray],
    resamples: int = DEFAULT_BOOTSTRAP,
    seed: int = 0,
    level: float = 0.95,
) -> Tuple[float, float]:
    """
    斜率的自助法百分位置信区间。

    Args:
        x: 横坐标（时间）。
        samples: 每个横坐标一组按实现排列的样本（长度可以不同）。
    """
    rng = np.random.default_rng(seed)
    slopes = np.empty(resamples)
    for b in range(resamples):
        means = [float(np.mean(s[rng.integers(0, s.shape[0], s.shape[0])])) for s in samples]
        slopes[b] = loglog_slope(x, means)
    slopes = slopes[np.isfinite(slopes)]
    if slopes.size == 0:
        return float("nan"), float("nan")
    alpha = 0.5 * (1.0 - level)
    return float(np.quantile(slopes, alpha)), float(np.quantile(slopes, 1.0 - alpha))


# ---- 时间增量标度研究 -----------------------------------------------------------


class IncrementMomentCollector:
    """每次实现：对每个滞后 ℓ，在 n 上平均 ‖X^{n+ℓ} - X^n‖⁴_{-1,h}。"""

    def __init__(self, lags: Sequence[int]) -> None:
        self.lags = [int(l) for l in lags]

    def __call__(self, traj: Trajectory) -> np.ndarray:
        dist = gram_distances(hminus1_gram(traj.space, traj.coefficient_matrix()))
        out = np.empty(len(self.lags))
        for k, lag in enumerate(self.lags):
            d = np.diagonal(dist, offset=lag)
            out[k] = float(np.mean(d**4))
        return out


@dataclass
class ScalingResult:
    """
    标度研究结果。

    Attributes:
        lags: 滞后步数。
        times: t_ℓ = ℓτ。
        moments: 每个滞后的四阶矩估计。
        stderrs: 对应标准误。
        slope: log-log 斜率。
        ci: 自助法 95% 置信区间。
        degenerate: 增量全为 0（例如零噪声的静止解）。
        realizations: M。
    """

    lags: List[int]
    times: List[float]
    moments: List[float]
    stderrs: List[float]
    slope: float
    ci: Tuple[float, float]
    degenerate: bool
    realizations: int


def _scaling_result(lags, times, per_real: np.ndarray, bootstrap: int, ci_seed: int) -> ScalingResult:
    M = per_real.shape[0]
    moments = per_real.mean(axis=0)
    stderrs = per_real.std(axis=0, ddof=1) / np.sqrt(M) if M >= 2 else np.full(len(lags), np.nan)
    degenerate = bool(np.any(moments <= 0.0))
    if degenerate:
        slope, ci = float("nan"), (float("nan"), float("nan"))
    else:
        slope = loglog_slope(times, moments)
        ci = bootstrap_slope_ci(times, [per_real[:, k] for k in range(len(lags))], bootstrap, ci_seed)
    return ScalingResult(
        lags=list(lags),
        times=list(times),
        moments=[float(m) for m in moments],
        stderrs=[float(s) for s in stderrs],
        slope=slope,
        ci=ci,
        degenerate=degenerate,
        realizations=M,
    )


def increment_scaling_study(
    scenario: Scenario,
    lags: Sequence[int] = DEFAULT_LAGS,
    realizations: int = 64,
    base_seed: int = 0,
    workers: int = 1,
    bootstrap: int = DEFAULT_BOOTSTRAP,
) -> ScalingResult:
    """
    时间增量的四阶 H⁻¹ 矩对 t_ℓ 的 log-log 斜率。

    Raises:
        ValueError: N < 2·max(lags)。
    """
    N = scenario.params.N
    if N < 2 * max(lags):
        raise ValueError(f"步数 N={N} 必须 ≥ 2·max(lags)={2 * max(lags)}")
    per_real = np.vstack(run_realizations(scenario, realizations, base_seed, IncrementMomentCollector(lags), workers))
    times = [lag * scenario.params.tau for lag in lags]
    result = _scaling_result(lags, times, per_real, bootstrap, base_seed)
    logger.info(
        "增量标度研究完成: M=%d, slope=%.4f, ci=(%.4f, %.4f), degenerate=%s",
        realizations,
        result.slope,
        result.ci[0],
        result.ci[1],
        result.degenerate,
    )
    return result


# ---- 能量矩研究 -------------------------------------------------------------------


@dataclass
class EnergyMomentResult:
    """
    E[A²] 随步数的变化（A 为能量聚合量）。

    slope 为 log E[A²] 对 log N 的斜率：细化 τ 时矩增长则斜率为正。
    """

    steps: List[int]
    taus: List[float]
    moments: List[float]
    stderrs: List[float]
    slope: float
    ci: Tuple[float, float]
    realizations: int

    def bounded(self) -> Optional[bool]:
        """置信区间下端 ≤ 0 即没有显著增长；区间无定义时返回 None。"""
        if not np.isfinite(self.ci[0]):
            return None
        return bool(self.ci[0] <= 0.0)


def energy_moment_study(
    scenario: Scenario,
    step_counts: Sequence[int],
    realizations: int = 16,
    base_seed: int = 0,
    workers: int = 1,
    bootstrap: int = DEFAULT_BOOTSTRAP,
) -> EnergyMomentResult:
    """
    在一组步数上估计 E[(½ sup‖X^i‖² + Σ(¼‖ΔX‖² + τJ_ε))²]，拟合 log E[A²] 对 log N 的斜率。
    """
    collector = ObservableCollector(["energy_aggregate"])
    samples: List[np.ndarray] = []
    taus: List[float] = []
    for N in step_counts:
        grid = TimeGrid(scenario.params.grid.horizon, int(N))
        results = run_realizations(scenario.with_grid(grid), realizations, base_seed, collector, workers)
        a = np.array([res["energy_aggregate"] for res in results])
        samples.append(a * a)
        taus.append(grid.tau)
    moments = [float(np.mean(s)) for s in samples]
    stderrs = [float(np.std(s, ddof=1) / np.sqrt(s.shape[0])) if s.shape[0] >= 2 else float("nan") for s in samples]
    steps = [int(n) for n in step_counts]
    slope = loglog_slope(steps, moments)
    ci = bootstrap_slope_ci(steps, samples, bootstrap, base_seed)
    logger.info("能量矩研究完成: steps=%s, slope=%.4f, ci=(%.4f, %.4f)", list(step_counts), slope, ci[0], ci[1])
    return EnergyMomentResult(
        steps=steps,
        taus=taus,
        moments=moments,
        stderrs=stderrs,
        slope=slope,
        ci=ci,
        realizations=realizations,
    )
