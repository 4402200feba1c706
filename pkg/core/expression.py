"""
场表达式

把配置中的字符串（例如 "0.5*indicator_box(x, y, 0.25, 0.25, 0.75, 0.75)"）
解析为逐点向量化的标量场 f(x, y) -> values：
- 四则混合运算、乘方、小括号、比较
- 函数调用：sin(), indicator_disk() 等（从 InstanceRegistry 获取）
- 名称：x、y、pi 以及调用方给出的常量参数

表达式先经过 AST 白名单校验，再在无 builtins 的环境中求值。
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict

import ast
import math

import numpy as np

from .instance import InstanceRegistry


class ExpressionError(Exception):
    """表达式解析或求值相关错误。"""


COORDINATE_NAMES = ("x", "y")
BUILTIN_CONSTANTS = {"pi": math.pi, "e": math.e}

_ALLOWED_BINOPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.Mod, ast.FloorDiv)
_ALLOWED_UNARYOPS = (ast.UAdd, ast.USub)
_ALLOWED_CMPOPS = (ast.Lt, ast.LtE, ast.Gt, ast.GtE, ast.Eq, ast.NotEq)


@dataclass
class FieldExpression:
    """
    一个已校验的场表达式。

    Attributes:
        source: 表达式字符串。
        constants: 额外的常量参数（例如 {"height": 0.5}），不能与 x、y 或函数名重名。
    """

    source: str
    constants: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name in self.constants:
            if name in COORDINATE_NAMES or InstanceRegistry.get_function(name) is not None:
                raise ExpressionError(f"常量名与坐标或函数重名: {name}")
        try:
            tree = ast.parse(self.source.strip(), mode="eval")
        except SyntaxError as exc:
            raise ExpressionError(f"表达式语法错误: {self.source}, 错误: {exc}") from exc
        self._validate_ast(tree.body)
        self._code = compile(tree, filename="<field-expression>", mode="eval")

    def _known_name(self, name: str) -> bool:
        return (
            name in COORDINATE_NAMES
            or name in BUILTIN_CONSTANTS
            or name in self.constants
            or InstanceRegistry.get_function(name) is not None
        )

    def _validate_ast(self, node: ast.AST) -> None:
        """
        验证 AST 节点是否允许。

        允许的节点类型：BinOp、UnaryOp、Compare、Call（只能调用已注册函数）、Name、数值常量。
        属性访问、下标、lambda 等一律拒绝。
        """
        if isinstance(node, ast.BinOp):
            if not isinstance(node.op, _ALLOWED_BINOPS):
                raise ExpressionError(f"不允许的运算符: {type(node.op).__name__}")
            self._validate_ast(node.left)
            self._validate_ast(node.right)
        elif isinstance(node, ast.UnaryOp):
            if not isinstance(node.op, _ALLOWED_UNARYOPS):
                raise ExpressionError(f"不允许的运算符: {type(node.op).__name__}")
            self._validate_ast(node.operand)
        elif isinstance(node, ast.Compare):
            if not all(isinstance(op, _ALLOWED_CMPOPS) for op in node.ops):
                raise ExpressionError("不允许的比较运算符")
            self._validate_ast(node.left)
            for comparator in node.comparators:
                self._validate_ast(comparator)
        elif isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or InstanceRegistry.get_function(node.func.id) is None:
                raise ExpressionError(f"未注册的函数: {ast.unparse(node.func)}")
            if node.keywords:
                raise ExpressionError("场表达式不支持关键字参数")
            for arg in node.args:
                self._validate_ast(arg)
        elif isinstance(node, ast.Name):
            if not self._known_name(node.id):
                raise ExpressionError(f"表达式变量未定义: {node.id}")
        elif isinstance(node, ast.Constant):
            if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
                raise ExpressionError(f"只允许数值常量: {node.value!r}")
        else:
            raise ExpressionError(f"不允许的 AST 节点类型: {type(node).__name__}")

    def _build_env(self, x: np.ndarray, y: np.ndarray) -> Dict[str, Any]:
        env: Dict[str, Any] = dict(BUILTIN_CONSTANTS)
        env.update({name: float(value) for name, value in self.constants.items()})
        for func_name in InstanceRegistry.list_functions():
            env[func_name] = InstanceRegistry.get_function(func_name)
        env["x"] = x
        env["y"] = y
        return env

    def __call__(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """
        在一组点上求值。

        Args:
            x, y: 同形状（或可广播）的坐标数组。

        Returns:
            与 x、y 广播后同形状的浮点数组；常量表达式会被广播。

        Raises:
            ExpressionError: 求值失败或结果含非有限值。
        """
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        try:
            with np.errstate(all="raise"):
                value = eval(self._code, {"__builtins__": {}}, self._build_env(x, y))
        except Exception as exc:  # noqa: BLE001
            raise ExpressionError(f"表达式执行失败: {self.source}, 错误: {exc}") from exc
        values = np.broadcast_to(np.asarray(value, dtype=float), x.shape).copy()
        if not np.all(np.isfinite(values)):
            raise ExpressionError(f"表达式结果含非有限值: {self.source}")
        return values


def parse_field(source: str | float | int, constants: Dict[str, float] | None = None) -> FieldExpression:
    """把配置值（字符串或数字）转换为 FieldExpression。"""
    if isinstance(source, bool):
        raise ExpressionError(f"场表达式不能是布尔值: {source}")
    if isinstance(source, (int, float)):
        source = repr(float(source))
    return FieldExpression(str(source), dict(constants or {}))
