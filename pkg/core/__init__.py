"""
stvf.core

有限元求解与研究调度相关模块：
- 网格 `mesh`、求积 `quadrature`、有限元空间 `fespace`、线性求解 `linalg`
- 时间网格 `clock`、噪声 `noise`、时间推进格式 `scheme`
- 能量与诊断量 `functionals`、离散变分不等式 `svi`、Monte Carlo `mc`
- 配置解析 `parser`、场表达式 `expression`、测试图像 `image`
- 对象工厂 `factory` 与执行引擎 `engine`
"""
