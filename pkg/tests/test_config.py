"""
配置解析与场表达式测试
"""

import pathlib
import sys

# 添加项目根目录到路径
project_root = pathlib.Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

import numpy as np
import pytest

import functions  # noqa: F401  注册场函数
from core.expression import ExpressionError, parse_field
from core.parser import SCHEMA_VERSION, ConfigError, ConfigParser, known_keys


CONFIG_DIR = project_root / "config"


def test_parse_shipped_configs():
    """config/ 下的所有示例配置都能解析。"""
    parser = ConfigParser()
    paths = sorted(CONFIG_DIR.glob("*.yaml"))
    assert paths
    for path in paths:
        config = parser.parse_file(path)
        assert config.schema_version == SCHEMA_VERSION
        assert config.steps >= 1
    print(f"[OK] 解析了 {len(paths)} 个配置文件")


def test_defaults():
    config = ConfigParser().parse_dict({"schema_version": 1, "study": "denoise"})
    assert config.T == 0.1
    assert config.lam == 200.0
    assert config.epsilon == 1e-4
    assert config.tau == 1e-3
    assert config.level == 6
    assert config.sigma == 1.0
    assert config.steps == 100
    assert config.to_dict()["lambda"] == 200.0


def test_study_name_normalized():
    config = ConfigParser().parse_dict({"study": "Energy_Inequality"})
    assert config.study == "energy-inequality"


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="colour"):
        ConfigParser().parse_dict({"study": "denoise", "colour": "red"})


@pytest.mark.parametrize(
    "updates",
    [
        {"schema_version": 2},
        {"study": "nope"},
        {"tau": 0.03},
        {"epsilon": 0.0},
        {"lambda": -1},
        {"level": 0},
        {"element": "q1"},
        {"noise_kind": "poisson"},
        {"realizations": 0},
        {"data": "expression", "x0": "0"},
        {"level": 2.5},
        {"compare_deterministic": "yes"},
        {"seed": True},
    ],
)
def test_invalid_values(updates):
    data = {"schema_version": 1, "study": "denoise"}
    data.update(updates)
    with pytest.raises(ConfigError):
        ConfigParser().parse_dict(data)


def test_missing_schema_version(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("study: denoise\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="schema_version"):
        ConfigParser().parse_file(path)
    with pytest.raises(ConfigError):
        ConfigParser().parse_file(tmp_path / "missing.yaml")
    path.write_text("- a\n- b\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        ConfigParser().parse_file(path)


def test_overrides(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("schema_version: 1\nstudy: donsker\ntau: 0.0005\n", encoding="utf-8")
    config = ConfigParser().parse_file(path, {"seed": 9, "sigma": None, "lambda": 50})
    assert config.seed == 9
    assert config.sigma == 1.0
    assert config.lam == 50.0
    assert config.steps == 200
    with pytest.raises(ConfigError):
        ConfigParser().parse_file(path, {"tau": 0.07})


def test_known_keys():
    keys = known_keys()
    assert "lambda" in keys
    assert "lam" not in keys
    assert "schema_version" in keys


def test_expression_evaluation():
    f = parse_field("0.5*indicator_box(x, y, 0.25, 0.25, 0.75, 0.75) + indicator_disk(x, y, 0.5, 0.5, 0.1)")
    x = np.array([0.5, 0.3, 0.0])
    y = np.array([0.5, 0.3, 0.0])
    assert np.allclose(f(x, y), [1.5, 0.5, 0.0])

    g = parse_field("sin(pi*x)*sin(pi*y)")
    assert g(np.array([0.5]), np.array([0.5]))[0] == pytest.approx(1.0)

    const = parse_field(0.25)
    assert np.all(const(np.zeros(4), np.ones(4)) == 0.25)

    scaled = parse_field("h*x", {"h": 2.0})
    assert scaled(np.array([0.25]), np.array([0.0]))[0] == 0.5


@pytest.mark.parametrize(
    "source",
    [
        "__import__('os')",
        "x.real",
        "x[0]",
        "lambda: 1",
        "unknown_func(x)",
        "z + 1",
        "'text'",
        "x +",
    ],
)
def test_expression_rejects(source):
    with pytest.raises(ExpressionError):
        parse_field(source)


def test_expression_runtime_errors():
    with pytest.raises(ExpressionError):
        parse_field("1/(x-x)")(np.array([0.5]), np.array([0.5]))
    with pytest.raises(ExpressionError):
        parse_field("sqrt(x-1)")(np.array([0.5]), np.array([0.5]))
    with pytest.raises(ExpressionError):
        parse_field("x", {"y": 1.0})
    with pytest.raises(ExpressionError):
        parse_field(True)


if __name__ == "__main__":
    test_parse_shipped_configs()
