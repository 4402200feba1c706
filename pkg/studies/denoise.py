"""
图像去噪实验

对合成测试图像（或场表达式给出的数据）运行随机全变差流，输出：
- steps.csv：逐步报告（能量、误差、不动点迭代次数、能量不等式余量）
- curves.csv：误差曲线 t_i ↦ (λ/2)‖X^i - g̃_h‖²，可附带 σ=0 对照与各 σ 的曲线
- final.pgm / final.png：终态图像（CR 取 Π⁰_h 投影）
"""

from __future__ import annotations

from typing import Any, Dict, Optional, Tuple

import numpy as np

from core.factory import build_data, build_scenario, build_space
from core.fespace import CR, P1, State, project_p0, transfer
from core.functionals import p0_distance_squared
from core.image import render_image
from core.mc import Scenario
from core.scheme import Trajectory
from data_manager import write_noise, write_pgm, write_png, write_trajectory
from utils.logger import get_logger

from .base import BaseStudy, error_curve, step_report_rows


logger = get_logger()


class DenoiseStudy(BaseStudy):
    """
    去噪实验。

    判定（只在有确定性对照时给出）：
    - σ=0 的终态误差小于数据噪声能量 (λ/2)‖g_h - g̃_h‖²；
    - 给出 band_sigmas 时，随机曲线偏离确定性曲线的最大距离随 σ 单调不减；
    - compare_elements 时，CR 的终态误差不大于 P1。
    """

    name = "denoise"
    chinese_name = "图像去噪实验"
    doc = """
# 图像去噪实验

以 x⁰ = g̃_h 为初值、g_h = g̃_h + ξ_h 为数据，运行正则化随机全变差流，
记录能量与误差曲线并渲染终态图像。

## 使用示例

```yaml
schema_version: 1
study: denoise
element: cr
level: 6
compare_deterministic: true
band_sigmas: [0.25, 1.0]
```
"""
    params_table = """
| 配置项 | 含义 | 默认值 |
|--------|------|--------|
| element | 单元类型 p1 / cr | p1 |
| level | 求解网格层数 | 6 |
| sigma | 噪声强度 | 1.0 |
| resolution | 输出图像边长（像素） | 256 |
| compare_deterministic | 同时运行 σ=0 对照 | false |
| band_sigmas | 额外运行的 σ 列表 | [] |
| compare_elements | 同时用另一种单元运行 σ=0 | false |
| dump_trajectory | 写出二进制轨迹与噪声 | false |
"""

    def _write_images(self, space, state: State, stem: str, piecewise_constant: Optional[bool] = None) -> None:
        raster = render_image(space, state, self.config.resolution, piecewise_constant)
        self.record(write_pgm(raster, self.path(f"{stem}.pgm")))
        self.record(write_png(raster, self.path(f"{stem}.png")))

    def _deterministic(self, scenario: Scenario, traj: Trajectory) -> Trajectory:
        if scenario.model.is_zero:
            return traj
        return scenario.with_model(scenario.model.with_sigma(0.0)).run(self.config.seed)

    def _p0_error(self, traj: Trajectory, clean: State) -> float:
        """CR 终态的分片常数投影 Π⁰_h X^N 与干净图像之间的误差。"""
        cfg = self.config
        space = traj.space
        p1_space = build_space(cfg.level, P1)
        reference = clean if clean.space is p1_space else transfer(clean, p1_space)
        return 0.5 * cfg.lam * p0_distance_squared(p1_space, project_p0(space, traj.states[-1]), reference)

    def _compare_elements(self, final_error_here: float) -> Tuple[bool, Dict[str, Any]]:
        cfg = self.config
        other = CR if cfg.element == P1 else P1
        other_space = build_space(cfg.level, other)
        other_data = build_data(cfg, other_space)
        other_traj = build_scenario(cfg, other_space, sigma=0.0, data=other_data).run(cfg.seed)
        other_error = float(error_curve(other_traj, other_data.clean_h)[-1])
        errors = {cfg.element: final_error_here, other: other_error}
        cr_not_worse = errors[CR] <= errors[P1]
        logger.info("单元对比 (σ=0): p1=%.6e, cr=%.6e", errors[P1], errors[CR])
        return cr_not_worse, {
            "p1_final_error_sigma0": errors[P1],
            "cr_final_error_sigma0": errors[CR],
            "cr_not_worse": cr_not_worse,
        }

    def execute(self) -> Tuple[Optional[bool], Dict[str, Any]]:
        cfg = self.config
        space = build_space(cfg.level, cfg.element)
        data = build_data(cfg, space)
        scenario = build_scenario(cfg, space, data=data)
        logger.info(
            "去噪实验: %s, N=%d, tau=%g, sigma=%g, lambda=%g, epsilon=%g",
            space.describe(),
            scenario.params.N,
            scenario.params.tau,
            scenario.model.sigma,
            cfg.lam,
            cfg.epsilon,
        )
        traj = scenario.run(cfg.seed)
        reference = data.clean_h
        step_rows = step_report_rows(traj, reference)
        self.export(step_rows, "step_report", "steps.csv")

        diff = data.g_h.coefficients - reference.coefficients
        noise_energy = 0.5 * cfg.lam * float(diff @ (space.mass_matrix @ diff))
        curves: Dict[str, np.ndarray] = {"error": error_curve(traj, reference)}
        descriptions = {"i": "i", "t": "t_i", "error": f"sigma={scenario.model.sigma:g}"}
        summary: Dict[str, Any] = {
            "element": cfg.element,
            "level": cfg.level,
            "steps": scenario.params.N,
            "sigma": scenario.model.sigma,
            "noise_energy": noise_energy,
            "initial_error": float(curves["error"][0]),
            "final_error": float(curves["error"][-1]),
            "final_j_eps": traj.reports[-1].j_eps if traj.reports else float("nan"),
            "min_energy_slack": min((r["energy_slack"] for r in step_rows), default=float("nan")),
            "max_iterations": max((r["iterations"] for r in step_rows), default=0),
        }
        if cfg.element == CR:
            summary["final_error_p0"] = self._p0_error(traj, data.clean)

        checks = []
        det_curve: Optional[np.ndarray] = None
        if cfg.compare_deterministic or cfg.band_sigmas or cfg.compare_elements or scenario.model.is_zero:
            det = self._deterministic(scenario, traj)
            det_curve = error_curve(det, reference)
            curves["error_sigma0"] = det_curve
            descriptions["error_sigma0"] = "sigma=0"
            below = bool(det_curve[-1] < noise_energy)
            summary["deterministic_final_error"] = float(det_curve[-1])
            summary["deterministic_below_noise"] = below
            checks.append(below)

        if cfg.band_sigmas:
            deviations = []
            for sigma in sorted(cfg.band_sigmas):
                run = scenario.with_model(scenario.model.with_sigma(sigma)).run(cfg.seed)
                curve = error_curve(run, reference)
                key = f"error_sigma{sigma:g}"
                curves[key] = curve
                descriptions[key] = f"sigma={sigma:g}"
                deviation = float(np.max(np.abs(curve - det_curve)))
                summary[f"band_sigma{sigma:g}"] = deviation
                deviations.append(deviation)
            monotone = bool(all(a <= b for a, b in zip(deviations, deviations[1:])))
            summary["band_monotone"] = monotone
            checks.append(monotone)

        if cfg.compare_elements:
            ok, extra = self._compare_elements(float(det_curve[-1]))
            summary.update(extra)
            checks.append(ok)

        times = traj.grid.times()
        curve_rows = [
            {"i": i, "t": float(times[i]), **{k: float(v[i]) for k, v in curves.items()}} for i in range(traj.N + 1)
        ]
        self.export(curve_rows, "curve", "curves.csv", extra_columns=list(curves), descriptions=descriptions)

        self._write_images(space, traj.states[-1], "final")
        if data.image is not None:
            self._write_images(data.data_space, data.image.clean, "clean", piecewise_constant=False)
            self._write_images(data.data_space, data.image.noisy, "noisy", piecewise_constant=False)

        if cfg.dump_trajectory:
            self.record(write_trajectory(traj, self.path("trajectory.bin")))
            self.record(write_noise(traj.noise_matrix(), traj.params.tau, self.path("noise.bin")))

        passed = all(checks) if checks else None
        return passed, summary
