"""
离散随机变分不等式的检验

测试过程 U 由递推

    U^0 = u0,  U^i = U^{i-1} - τ G^i + Σ_j H^{i-1,j} ξ^{i,j}

给出。适应性由回调签名保证：计算 G^ℓ、H^{ℓ-1} 的回调只能看到
ξ^1..ξ^{ℓ-1} 与 X^0..X^{ℓ-1}（AdaptedHistory）。

对每条轨迹计算不等式两侧

    LHS_i = ½‖X^i - U^i‖² + τ Σ_{ℓ≤i} J_ε(X^ℓ)
    RHS_i = ½‖X^0 - u0‖² + τ Σ_{ℓ≤i} [J_ε(U^ℓ) + (G^ℓ, X^ℓ - U^ℓ)]
            + (τ/2) Σ_{ℓ≤i} ‖P_h B(X^{ℓ-1}) - H^{ℓ-1}‖²_HS

再对实现取平均，按「两倍标准误 + 确定性容差预算」判定 PASS。
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from utils.logger import get_logger

from .fespace import AssemblyError, FeSpace, State
from .functionals import j_eps
from .noise import NoiseDimensionError, NoiseModel, b_matrix


logger = get_logger()

# 容差预算的默认比例
DEFAULT_BUDGET_SCALE = 1e-6


@dataclass(frozen=True, eq=False)
class AdaptedHistory:
    """
    第 ℓ 步的可见历史。

    Attributes:
        index: ℓ（1..N）。
        J: 噪声分量个数。
        increments: ξ^1..ξ^{ℓ-1}，shape (ℓ-1, J)。
        states: X^0..X^{ℓ-1}，shape (ℓ, ndof)；没有轨迹时为空。
    """

    index: int
    J: int
    increments: np.ndarray
    states: np.ndarray


DriftCallback = Callable[[int, AdaptedHistory], np.ndarray]
DiffusionCallback = Callable[[int, AdaptedHistory], Optional[sp.spmatrix]]


@dataclass(frozen=True, eq=False)
class TestProcess:
    """
    测试过程。

    Attributes:
        u0: 初值系数。
        G: G^1..G^N，shape (N, ndof)。
        H: H^0..H^{N-1}，每个为 (ndof, J) 稀疏矩阵；None 表示零族。
        increments: 所用噪声增量，shape (N, J)。
        U: U^0..U^N，shape (N+1, ndof)。
        tau: 时间步长。
    """

    u0: np.ndarray
    G: np.ndarray
    H: Optional[List[sp.csr_matrix]]
    increments: np.ndarray
    U: np.ndarray
    tau: float

    def recursion_defect(self) -> float:
        """max |U^i - U^{i-1} + τG^i - H^{i-1}ξ^i|，递推精确时为舍入误差量级。"""
        defect = 0.0
        for i in range(1, self.U.shape[0]):
            noise = self.H[i - 1] @ self.increments[i - 1] if self.H is not None else 0.0
            r = self.U[i] - self.U[i - 1] + self.tau * self.G[i - 1] - noise
            defect = max(defect, float(np.max(np.abs(r))))
        return defect


def build_test_process(
    space: FeSpace,
    tau: float,
    u0: State | np.ndarray,
    drift: DriftCallback,
    diffusion: DiffusionCallback | None,
    increments: np.ndarray,
    states: np.ndarray | None = None,
) -> TestProcess:
    """
    按递推构造测试过程。

    Args:
        space: 有限元空间。
        tau: 时间步长。
        u0: 初值。
        drift: (ℓ, history) -> G^ℓ 系数。
        diffusion: (ℓ, history) -> H^{ℓ-1}（(ndof, J) 矩阵），None 表示零族。
        increments: 噪声增量 shape (N, J)。
        states: 可选的轨迹 X^0..X^N，回调只会看到 X^0..X^{ℓ-1}。

    Raises:
        AssemblyError: G 或 u0 维度不符。
        NoiseDimensionError: H 的形状不符。
    """
    ndof = space.dof_count
    u = np.asarray(u0.coefficients if isinstance(u0, State) else u0, dtype=float)
    if u.shape != (ndof,):
        raise AssemblyError(f"u0 维度不符: got {u.shape}, expected ({ndof},)")
    xi = np.asarray(increments, dtype=float)
    if xi.ndim != 2:
        raise NoiseDimensionError("噪声增量必须是 (N, J) 矩阵")
    N, J = xi.shape
    empty_states = np.zeros((0, ndof))

    U = np.zeros((N + 1, ndof))
    G = np.zeros((N, ndof))
    H: Optional[List[sp.csr_matrix]] = [] if diffusion is not None else None
    U[0] = u
    for ell in range(1, N + 1):
        history = AdaptedHistory(
            index=ell,
            J=J,
            increments=xi[: ell - 1],
            states=states[:ell] if states is not None else empty_states,
        )
        g = np.asarray(drift(ell, history), dtype=float)
        if g.shape != (ndof,):
            raise AssemblyError(f"G^{ell} 维度不符: got {g.shape}, expected ({ndof},)")
        G[ell - 1] = g
        U[ell] = U[ell - 1] - tau * g
        if H is not None:
            h = diffusion(ell, history)
            h = sp.csr_matrix((ndof, J)) if h is None else sp.csr_matrix(h)
            if h.shape != (ndof, J):
                raise NoiseDimensionError(f"H^{ell - 1} 形状不符: got {h.shape}, expected ({ndof}, {J})")
            H.append(h)
            U[ell] += h @ xi[ell - 1]
    return TestProcess(u0=u, G=G, H=H, increments=xi, U=U, tau=float(tau))


# ---- 测试过程族 ----------------------------------------------------------------


class TestFamily:
    """
    测试过程族的基类。子类覆盖 drift / diffusion。

    类实例可以被 pickle，便于在 Monte Carlo worker 中使用。
    """

    __test__ = False  # 避免被 pytest 当作测试类收集
    name = "base"

    def initial(self, trajectory) -> np.ndarray:
        """默认 u0 = X^0。"""
        return trajectory.states[0].coefficients

    def drift(self, ell: int, history: AdaptedHistory) -> np.ndarray:
        raise NotImplementedError

    def diffusion(self, ell: int, history: AdaptedHistory) -> Optional[sp.spmatrix]:
        return None

    def build(self, trajectory) -> TestProcess:
        """用轨迹的噪声增量与状态构造测试过程。"""
        space = trajectory.space
        xi = trajectory.noise_matrix()
        if xi.size == 0:
            xi = np.zeros((0, 1))
        return build_test_process(
            space,
            trajectory.params.tau,
            self.initial(trajectory),
            self.drift,
            self.diffusion,
            xi,
            trajectory.coefficient_matrix(),
        )


class ZeroFamily(TestFamily):
    """G = 0，H = 0：U 恒为 u0。"""

    name = "zero"

    def __init__(self, space: FeSpace) -> None:
        self.space = space

    def drift(self, ell: int, history: AdaptedHistory) -> np.ndarray:
        return np.zeros(self.space.dof_count)


class OracleFamily(TestFamily):
    """
    u0 = X^0，G = 0，H^{ℓ-1} = P_h B(X^{ℓ-1})：HS 项为零，不等式逐路径成立。
    """

    name = "oracle"

    def __init__(self, model: NoiseModel, space: FeSpace) -> None:
        self.model = model
        self.space = space

    def drift(self, ell: int, history: AdaptedHistory) -> np.ndarray:
        return np.zeros(self.space.dof_count)

    def diffusion(self, ell: int, history: AdaptedHistory) -> sp.spmatrix:
        prev = State(self.space, history.states[-1])
        return b_matrix(self.model, self.space, prev, history.J)


class FrozenCoefficientFamily(TestFamily):
    """
    冻结系数族：G 为时间常值的随机组合 Σ_{k<j0} a_k φ_k，
    H^{ℓ-1,j} = h_scale·φ_j（j < j0），j ≥ j0 时为 0。
    """

    name = "frozen"

    def __init__(self, space: FeSpace, j0: int = 4, seed: int = 0, g_scale: float = 1.0, h_scale: float = 1.0) -> None:
        if j0 < 1:
            raise ValueError(f"j0 必须 ≥ 1, got {j0}")
        self.space = space
        self.j0 = int(j0)
        self.h_scale = float(h_scale)
        rng = np.random.default_rng(seed)
        active = space.free_dofs[: self.j0]
        g = np.zeros(space.dof_count)
        g[active] = g_scale * rng.standard_normal(active.shape[0])
        self.g = g

    def drift(self, ell: int, history: AdaptedHistory) -> np.ndarray:
        return self.g

    def diffusion(self, ell: int, history: AdaptedHistory) -> sp.spmatrix:
        active = min(self.j0, history.J, self.space.num_free)
        rows = self.space.free_dofs[:active]
        return sp.csr_matrix(
            (np.full(active, self.h_scale), (rows, np.arange(active))),
            shape=(self.space.dof_count, history.J),
        )


class CallbackFamily(TestFamily):
    """用户提供的回调（例如按轨迹回放构造的 G、H）。"""

    name = "callback"

    def __init__(self, drift: DriftCallback, diffusion: DiffusionCallback | None = None, u0: np.ndarray | None = None) -> None:
        self._drift = drift
        self._diffusion = diffusion
        self._u0 = u0

    def initial(self, trajectory) -> np.ndarray:
        return self._u0 if self._u0 is not None else super().initial(trajectory)

    def drift(self, ell: int, history: AdaptedHistory) -> np.ndarray:
        return self._drift(ell, history)

    def diffusion(self, ell: int, history: AdaptedHistory) -> Optional[sp.spmatrix]:
        return self._diffusion(ell, history) if self._diffusion is not None else None


# ---- 不等式两侧 ----------------------------------------------------------------


def _hs_norm_sq(space: FeSpace, D: sp.spmatrix) -> float:
    """Σ_j ‖D e_j‖²_{L²}。"""
    return float((space.mass_matrix @ D).multiply(D).sum())


def svi_terms(trajectory, family: TestFamily) -> Tuple[np.ndarray, np.ndarray]:
    """
    单条轨迹上不等式两侧的路径值，各 shape (N,)，第 k 个对应 i = k+1。
    """
    space = trajectory.space
    params = trajectory.params
    M = space.mass_matrix
    tau = params.tau
    g_h = trajectory.g_h
    test = family.build(trajectory)
    X = trajectory.coefficient_matrix()
    N = X.shape[0] - 1
    J = test.increments.shape[1] if test.increments.size else 1

    def sq(v: np.ndarray) -> float:
        return float(v @ (M @ v))

    lhs = np.zeros(N)
    rhs = np.zeros(N)
    base = 0.5 * sq(X[0] - test.u0)
    acc_j = 0.0
    acc_rhs = 0.0
    for i in range(1, N + 1):
        e = X[i] - test.U[i]
        acc_j += tau * j_eps(space, X[i], g_h, params.epsilon, params.lam)
        B = b_matrix(trajectory.model, space, trajectory.states[i - 1], J)
        D = B - test.H[i - 1] if test.H is not None else B
        acc_rhs += tau * (
            j_eps(space, test.U[i], g_h, params.epsilon, params.lam) + float(test.G[i - 1] @ (M @ e))
        ) + 0.5 * tau * _hs_norm_sq(space, D)
        lhs[i - 1] = 0.5 * sq(e) + acc_j
        rhs[i - 1] = base + acc_rhs
    return lhs, rhs


@dataclass(frozen=True)
class SviRow:
    index: int
    time: float
    lhs: float
    rhs: float
    lhs_stderr: float
    rhs_stderr: float
    diff_stderr: float
    slack: float
    budget: float
    passed: bool

    @property
    def margin(self) -> float:
        """RHS + 2·stderr + budget - LHS；标准误无定义（M = 1）时按 0 计。"""
        se = self.diff_stderr if np.isfinite(self.diff_stderr) else 0.0
        return self.rhs + 2.0 * se + self.budget - self.lhs


@dataclass
class SviReport:
    """逐时间层的检验结果。"""

    family: str
    realizations: int
    rows: List[SviRow] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(row.passed for row in self.rows)

    def min_margin(self) -> float:
        """各时间层 margin 的最小值，与 passed 的判定一致。"""
        if not self.rows:
            return 0.0
        return min(r.margin for r in self.rows)


def _stderr(samples: np.ndarray) -> np.ndarray:
    M = samples.shape[0]
    if M < 2:
        return np.full(samples.shape[1:], np.nan)
    return samples.std(axis=0, ddof=1) / np.sqrt(M)


def summarize_svi(
    lhs: np.ndarray,
    rhs: np.ndarray,
    times: Sequence[float],
    max_sq_norm: float,
    family: str,
    budget_scale: float = DEFAULT_BUDGET_SCALE,
) -> SviReport:
    """
    把 M 条轨迹的路径值（shape (M, N)）汇总为报告。
    M = 1 时标准误记为 NaN，判定只用容差预算。
    """
    lhs = np.atleast_2d(lhs)
    rhs = np.atleast_2d(rhs)
    M, N = lhs.shape
    lhs_se = _stderr(lhs)
    rhs_se = _stderr(rhs)
    diff_se = _stderr(lhs - rhs)
    report = SviReport(family=family, realizations=M)
    for k in range(N):
        i = k + 1
        l_mean = float(lhs[:, k].mean())
        r_mean = float(rhs[:, k].mean())
        se = float(diff_se[k]) if np.isfinite(diff_se[k]) else 0.0
        budget = budget_scale * (1.0 + max_sq_norm) * i
        report.rows.append(
            SviRow(
                index=i,
                time=float(times[i]),
                lhs=l_mean,
                rhs=r_mean,
                lhs_stderr=float(lhs_se[k]),
                rhs_stderr=float(rhs_se[k]),
                diff_stderr=float(diff_se[k]),
                slack=r_mean - l_mean,
                budget=budget,
                passed=r_mean + 2.0 * se + budget - l_mean >= 0.0,
            )
        )
    return report


def max_squared_norm(trajectory) -> float:
    """max_ℓ ‖X^ℓ‖²。"""
    X = trajectory.coefficient_matrix()
    M = trajectory.space.mass_matrix
    return float(np.max(np.einsum("ij,ij->i", X, (M @ X.T).T)))


def verify_svi(
    trajectories: Sequence,
    family: TestFamily,
    budget_scale: float = DEFAULT_BUDGET_SCALE,
) -> SviReport:
    """
    在同一空间、同一噪声族的多条轨迹上检验离散变分不等式。

    Returns:
        SviReport；只报告，不抛出违例。
    """
    if not trajectories:
        raise ValueError("至少需要一条轨迹")
    pairs = [svi_terms(traj, family) for traj in trajectories]
    lhs = np.vstack([p[0] for p in pairs])
    rhs = np.vstack([p[1] for p in pairs])
    max_sq = max(max_squared_norm(traj) for traj in trajectories)
    report = summarize_svi(lhs, rhs, trajectories[0].grid.times(), max_sq, family.name, budget_scale)
    logger.info(
        "离散变分不等式检验: family=%s, M=%d, passed=%s, min_margin=%.3e",
        family.name,
        report.realizations,
        report.passed,
        report.min_margin(),
    )
    return report
