"""
场函数库

包含可以在场表达式中直接调用的函数，例如：
- sin, cos, exp, sqrt 等 numpy 逐点函数
- indicator_box, indicator_disk 等示性函数

所有函数通过 InstanceRegistry 注册，可以在表达式中直接使用。
"""

import numpy as np

from core.instance import InstanceRegistry

from .field_functions import clip_func, indicator_box, indicator_disk, sqrt_func

# 自定义函数（带参数检查）
InstanceRegistry.register_function("sqrt", sqrt_func)
InstanceRegistry.register_function("clip", clip_func)
InstanceRegistry.register_function("indicator_box", indicator_box)
InstanceRegistry.register_function("indicator_disk", indicator_disk)

# numpy 逐点函数
for _name in ("abs", "sin", "cos", "tan", "exp", "log", "arctan", "tanh", "floor", "ceil", "sign"):
    InstanceRegistry.register_function(_name, getattr(np, _name))

InstanceRegistry.register_function("min", np.minimum)
InstanceRegistry.register_function("max", np.maximum)
InstanceRegistry.register_function("where", np.where)

__all__ = []
