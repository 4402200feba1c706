"""
stvf 项目包

随机全变差流（stochastic total variation flow）的有限元求解器与实验框架。
"""
