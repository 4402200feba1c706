"""
研究端到端测试：小规模配置经 StudyEngine 运行，检查输出文件与判定
"""

import pathlib
import sys

# 添加项目根目录到路径
project_root = pathlib.Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

import numpy as np
import pandas as pd

import core.mc as mc_module
from core.engine import StudyEngine
from core.instance import InstanceRegistry
from core.parser import STUDIES
from data_manager.image_writer import read_pgm
from tools.energy_csv_checker import check_file


def _run(tmp_path, **settings):
    data = {"schema_version": 1, "out": str(tmp_path), "epsilon": 1e-2, "fixed_point_tol": 1e-8, "max_fixed_point_iter": 500}
    data.update(settings)
    return StudyEngine.from_dict(data).run()


def _summary(tmp_path):
    df = pd.read_csv(tmp_path / "summary.csv", dtype=str)
    return dict(zip(df["key"], df["value"]))


def test_all_studies_registered():
    assert sorted(InstanceRegistry.list_studies()) == sorted(STUDIES)
    for name in STUDIES:
        cls = InstanceRegistry.get_study(name)
        assert cls.name == name
        assert cls.chinese_name and cls.doc and cls.params_table
    print(f"[OK] 已注册 {len(STUDIES)} 个研究")


def test_denoise_outputs(tmp_path):
    result = _run(
        tmp_path,
        study="denoise",
        level=2,
        data_level=2,
        T=0.01,
        tau=0.002,
        resolution=16,
        compare_deterministic=True,
        dump_trajectory=True,
    )
    names = {p.name for p in result.files}
    for expected in ("config.yaml", "steps.csv", "curves.csv", "final.pgm", "final.png", "clean.pgm", "noisy.pgm", "trajectory.bin", "noise.bin", "summary.csv"):
        assert expected in names
    assert result.passed is result.summary["deterministic_below_noise"]
    assert "deterministic_final_error" in result.summary
    assert read_pgm(tmp_path / "final.pgm").shape == (16, 16)
    assert check_file(tmp_path / "steps.csv").passed

    curves = pd.read_csv(tmp_path / "curves.csv", skiprows=[1])
    assert list(curves.columns[:2]) == ["i", "t"]
    assert "error_sigma0" in curves.columns
    assert curves.shape[0] == 6
    assert _summary(tmp_path)["study"] == "denoise"


def test_denoise_checks_level4(tmp_path):
    """默认配置降到 level 4：三项对比检查全部成立。"""
    engine = StudyEngine.from_file(project_root / "config" / "denoise.yaml", {"level": 4, "out": str(tmp_path), "resolution": 64})
    result = engine.run()
    assert result.summary["deterministic_below_noise"] is True
    assert result.summary["band_monotone"] is True
    assert result.summary["cr_not_worse"] is True
    assert result.passed is True


def test_denoise_is_reproducible(tmp_path):
    settings = dict(study="denoise", element="cr", level=2, data_level=2, T=0.01, tau=0.002, resolution=16, seed=4)
    _run(tmp_path / "a", **settings)
    _run(tmp_path / "b", **settings)
    for name in ("steps.csv", "curves.csv", "final.pgm"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_denoise_expression_data(tmp_path):
    result = _run(
        tmp_path,
        study="denoise",
        level=2,
        T=0.004,
        tau=0.002,
        resolution=16,
        data="expression",
        x0="indicator_box(x, y, 0.25, 0.25, 0.75, 0.75)",
        g="0.5",
    )
    assert result.summary["steps"] == 2
    assert "noisy.pgm" not in {p.name for p in result.files}


def test_energy_inequality_passes(tmp_path):
    result = _run(tmp_path, study="energy-inequality", level=2, T=0.01, tau=0.001, realizations=3, sigma=1.0)
    assert result.passed is True
    assert result.summary["worst_margin"] >= 0.0
    mc = pd.read_csv(tmp_path / "mc_summary.csv")
    assert "final_sq_norm" in set(mc["observable"])
    assert (mc["realizations"] == 3).all()
    assert check_file(tmp_path / "steps.csv").passed


def test_energy_decay_zero_noise(tmp_path):
    result = _run(tmp_path, study="energy-inequality", level=2, T=0.01, tau=0.001, noise_operator="zero")
    assert result.passed is True
    assert result.summary["energy_monotone"] is True


def test_increment_scaling(tmp_path):
    """λ = 0、ε = 10、level 2、N = 64：斜率 ≥ 1.7。"""
    result = _run(
        tmp_path,
        study="increment-scaling",
        level=2,
        T=0.1,
        tau=0.0015625,
        epsilon=10.0,
        realizations=16,
        lags=[1, 2, 4, 8],
        bootstrap=50,
        seed=7,
        **{"lambda": 0.0},
    )
    assert result.passed is True
    scaling = pd.read_csv(tmp_path / "scaling.csv")
    assert list(scaling["lag"]) == [1, 2, 4, 8]


def test_increment_scaling_degenerate(tmp_path):
    """零初值、零数据、零噪声：所有增量为 0，斜率无定义。"""
    result = _run(
        tmp_path,
        study="increment-scaling",
        level=2,
        data="expression",
        data_level=2,
        x0="0",
        g="0",
        T=0.1,
        tau=0.005,
        noise_operator="zero",
        realizations=2,
        lags=[1, 2],
        bootstrap=10,
        **{"lambda": 0.0},
    )
    assert result.passed is None
    assert result.summary["degenerate"] is True


def test_svi_check_oracle(tmp_path):
    result = _run(tmp_path, study="svi-check", level=2, T=0.01, tau=0.002, realizations=4, svi_family="frozen")
    assert result.summary["oracle_passed"] is True
    svi = pd.read_csv(tmp_path / "svi.csv")
    assert set(svi["family"]) == {"oracle", "frozen"}
    assert (svi.groupby("family").size() == 5).all()


def test_svi_check_single_realization(tmp_path):
    _run(tmp_path, study="svi-check", level=2, data_level=2, T=0.01, tau=0.002, realizations=1, svi_family="zero")
    summary = _summary(tmp_path)
    assert summary["oracle_min_margin"] != "nan"
    assert float(summary["oracle_min_margin"]) >= 0.0
    svi = pd.read_csv(tmp_path / "svi.csv")
    assert np.isfinite(svi["margin"]).all()


def test_donsker(tmp_path):
    result = _run(tmp_path, study="donsker", T=0.1, tau=0.001, donsker_paths=20000, seed=11)
    assert result.summary["paths"] == 20000
    assert 0.94 * 0.1 <= result.summary["variance"] <= 1.06 * 0.1
    donsker = pd.read_csv(tmp_path / "donsker.csv")
    assert donsker.shape[0] == 20000
    # Rademacher 游走终值为 √τ 的整数倍，N = 100 为偶数
    steps = np.round(donsker["terminal"] / np.sqrt(0.001))
    assert np.allclose(donsker["terminal"], steps * np.sqrt(0.001), atol=1e-12)
    assert (steps % 2 == 0).all()


def test_projection_stability(tmp_path):
    result = _run(tmp_path, study="projection-stability", levels=[2, 3], max_mode=2)
    assert result.passed is True
    assert result.summary["kappa"] <= 2.0
    projection = pd.read_csv(tmp_path / "projection.csv")
    assert projection.shape[0] == 2 * 4


def test_energy_moment(tmp_path):
    result = _run(tmp_path, study="energy-moment", level=2, T=0.01, step_counts=[5, 10], realizations=4, bootstrap=20)
    assert result.passed in (True, False, None)
    moment = pd.read_csv(tmp_path / "energy_moment.csv")
    assert list(moment["steps"]) == [5, 10]
    assert (moment["moment"] > 0).all()


def test_energy_moment_growth_fails(tmp_path, monkeypatch):
    """矩按 N² 增长时研究判定为未通过。"""

    def growing(scenario, realizations, base_seed, collector, workers=1):
        N = scenario.params.grid.steps
        return [{"energy_aggregate": N * (1.0 + 0.01 * k)} for k in range(realizations)]

    monkeypatch.setattr(mc_module, "run_realizations", growing)
    result = _run(tmp_path, study="energy-moment", level=2, data_level=2, T=0.01, step_counts=[5, 10, 20], realizations=4, bootstrap=50)
    assert result.passed is False
    assert result.summary["slope"] > 1.9
    assert _summary(tmp_path)["ci_low"] != "nan"


if __name__ == "__main__":
    test_all_studies_registered()
