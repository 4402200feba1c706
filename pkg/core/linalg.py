"""
对称正定稀疏线性系统的求解

- direct：稀疏 LU 分解（scipy.sparse.linalg.splu），桌面规模下的默认选择。
- cg：Jacobi 预条件共轭梯度（scipy.sparse.linalg.cg）。

两种方式对调用方的约定只有一条：返回解的相对残差不超过给定容差。
"""

from __future__ import annotations

from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import cg, splu


SOLVER_METHODS = ("direct", "cg")

# 直接法允许的相对残差（远大于舍入误差，只用来捕捉奇异分解）
DIRECT_RESIDUAL_LIMIT = 1e-8


class LinearSolveFailure(RuntimeError):
    """线性求解失败（不收敛、奇异或结果非有限）。"""


def _relative_residual(matrix: sp.spmatrix, x: np.ndarray, rhs: np.ndarray) -> float:
    scale = float(np.linalg.norm(rhs))
    res = float(np.linalg.norm(matrix @ x - rhs))
    return res / scale if scale > 0.0 else res


def factorize(matrix: sp.spmatrix) -> Callable[[np.ndarray], np.ndarray]:
    """
    对矩阵做一次 LU 分解，返回可对多个右端项重复调用的求解函数。

    Raises:
        LinearSolveFailure: 矩阵奇异。
    """
    try:
        lu = splu(sp.csc_matrix(matrix))
    except RuntimeError as exc:
        raise LinearSolveFailure(f"稀疏 LU 分解失败: {exc}") from exc

    def solve(rhs: np.ndarray) -> np.ndarray:
        x = lu.solve(np.asarray(rhs, dtype=float))
        if not np.all(np.isfinite(x)):
            raise LinearSolveFailure("稀疏 LU 求解结果包含非有限值")
        return x

    return solve


def solve_spd(
    matrix: sp.spmatrix,
    rhs: np.ndarray,
    method: str = "direct",
    tol: float = 1e-10,
    maxiter: int | None = None,
) -> np.ndarray:
    """
    求解对称正定系统 matrix · x = rhs。

    Args:
        matrix: 稀疏对称正定矩阵。
        rhs: 右端项。
        method: "direct" 或 "cg"。
        tol: cg 的相对残差容差。
        maxiter: cg 最大迭代次数，默认 10·n。

    Returns:
        解向量。

    Raises:
        LinearSolveFailure: 求解失败。
        ValueError: 未知的求解方式。
    """
    rhs = np.asarray(rhs, dtype=float)
    if method == "direct":
        x = factorize(matrix)(rhs)
        rel = _relative_residual(matrix, x, rhs)
        if rel > DIRECT_RESIDUAL_LIMIT:
            raise LinearSolveFailure(f"直接求解残差过大: relative residual={rel:.3e}")
        return x

    if method == "cg":
        csr = sp.csr_matrix(matrix)
        diag = csr.diagonal()
        if np.any(diag <= 0.0):
            raise LinearSolveFailure("矩阵对角元非正，无法使用 Jacobi 预条件")
        precond = sp.diags(1.0 / diag)
        if maxiter is None:
            maxiter = 10 * csr.shape[0]
        x, info = cg(csr, rhs, rtol=tol, atol=0.0, maxiter=maxiter, M=precond)
        if info != 0 or not np.all(np.isfinite(x)):
            raise LinearSolveFailure(f"共轭梯度未收敛: info={info}, relative residual={_relative_residual(csr, x, rhs):.3e}")
        return x

    raise ValueError(f"未知的线性求解方式: {method}（可选 {', '.join(SOLVER_METHODS)}）")
