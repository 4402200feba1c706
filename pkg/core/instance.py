"""
类型注册表

本模块只负责「类型注册」，不承载具体计算逻辑：
- InstanceRegistry：统一管理 {名称 -> Python 对象} 的映射。

研究（studies 包）、Monte Carlo 观测量（core.mc）与场表达式函数（functions 包）
都在各自模块导入时通过 InstanceRegistry 注册。
"""

from __future__ import annotations

from typing import Any, Callable, Dict, List, Optional, Type, TypeVar

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from studies.base import BaseStudy

S = TypeVar("S", bound="BaseStudy")


class InstanceRegistry:
    """
    类型注册表。

    - studies：研究类型（denoise、donsker 等），名称不区分大小写，内部统一为小写并把 "_" 视为 "-"
    - observables：单条轨迹上的标量观测量，供 Monte Carlo 归约使用
    - functions：场表达式中可调用的 numpy 函数（sin、exp 等）

    所有注册/获取都通过类方法完成，便于在不同模块中统一使用。
    """

    _studies: Dict[str, Type[Any]] = {}
    _observables: Dict[str, Callable[..., Any]] = {}
    _functions: Dict[str, Callable[..., Any]] = {}

    @staticmethod
    def _study_key(name: str) -> str:
        return name.strip().lower().replace("_", "-")

    # ---- 研究注册/获取 -------------------------------------------------
    @classmethod
    def register_study(cls, name: str, study_class: Type[S]) -> None:
        """
        注册研究类型。

        Args:
            name: 研究名称，例如 "energy-inequality"。
            study_class: 继承自 BaseStudy 的类。
        """
        cls._studies[cls._study_key(name)] = study_class

    @classmethod
    def get_study(cls, name: str) -> Optional[Type[Any]]:
        """根据名称获取研究类，找不到时返回 None。"""
        return cls._studies.get(cls._study_key(name))

    # ---- 观测量注册/获取 -----------------------------------------------
    @classmethod
    def register_observable(cls, name: str, func: Callable[..., Any]) -> None:
        """
        注册观测量 func(trajectory) -> float 或 shape (N,) 的数组。
        """
        cls._observables[name] = func

    @classmethod
    def get_observable(cls, name: str) -> Optional[Callable[..., Any]]:
        return cls._observables.get(name)

    # ---- 场函数注册/获取 -----------------------------------------------
    @classmethod
    def register_function(cls, name: str, func: Callable[..., Any]) -> None:
        """
        注册场函数。

        这些函数可以直接在 x0、g 的场表达式中调用，例如 sin、indicator_box 等。
        """
        cls._functions[name] = func

    @classmethod
    def get_function(cls, name: str) -> Optional[Callable[..., Any]]:
        """根据名称获取场函数，找不到时返回 None。"""
        return cls._functions.get(name)

    @classmethod
    def list_studies(cls) -> List[str]:
        """返回已注册的研究名称列表。"""
        return sorted(cls._studies.keys())

    @classmethod
    def list_observables(cls) -> List[str]:
        return sorted(cls._observables.keys())

    @classmethod
    def list_functions(cls) -> List[str]:
        """返回已注册的场函数名称列表。"""
        return sorted(cls._functions.keys())
