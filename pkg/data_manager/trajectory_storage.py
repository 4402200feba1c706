"""
轨迹存储模块（二进制，小端序）

两种文件：
- 轨迹文件：头部（magic "STVFTRJ1"、单元类型、层数、N、自由度个数、J、τ、ε、λ、σ、种子），
  随后是 (N+1)×ndof 个 double（X⁰..X^N，行优先），再是 N×J 个 double（噪声增量）。
- 噪声文件：头部（magic "STVFNOI1"、N、J、τ），随后是 N×J 个 double。

读取器用于测试中的回放：用文件中的增量重新积分，得到逐位相同的轨迹。
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List

import numpy as np

from core.fespace import CR, P1, FeSpace, State
from core.noise import NoiseIncrement, NoiseModel
from core.scheme import SchemeParams, Trajectory, step
from utils.logger import get_logger


logger = get_logger()

TRAJECTORY_MAGIC = b"STVFTRJ1"
NOISE_MAGIC = b"STVFNOI1"

_KIND_CODES = {P1: 0, CR: 1}
_KIND_NAMES = {code: kind for kind, code in _KIND_CODES.items()}

TRAJECTORY_HEADER = np.dtype(
    [
        ("magic", "S8"),
        ("kind", "<u4"),
        ("level", "<u4"),
        ("steps", "<u8"),
        ("dofs", "<u8"),
        ("components", "<u8"),
        ("tau", "<f8"),
        ("epsilon", "<f8"),
        ("lam", "<f8"),
        ("sigma", "<f8"),
        ("seed", "<u8"),
    ]
)
NOISE_HEADER = np.dtype([("magic", "S8"), ("steps", "<u8"), ("components", "<u8"), ("tau", "<f8")])
_DOUBLE = np.dtype("<f8")


class TrajectoryStorageError(ValueError):
    """文件格式错误（magic 不符、长度不符等）。"""


@dataclass(frozen=True, eq=False)
class TrajectoryDump:
    """
    轨迹文件的内容。

    Attributes:
        header: 头部字段（kind 已还原为 "p1"/"cr"）。
        states: shape (N+1, ndof)。
        increments: shape (N, J)。
    """

    header: Dict[str, Any]
    states: np.ndarray
    increments: np.ndarray


@dataclass(frozen=True, eq=False)
class NoiseDump:
    """噪声文件的内容：tau 与 shape (N, J) 的增量。"""

    tau: float
    increments: np.ndarray


def _increments_of(trajectory: Trajectory) -> np.ndarray:
    matrix = trajectory.noise_matrix()
    if matrix.size == 0:
        J = trajectory.model.num_components(trajectory.space, trajectory.N)
        return np.zeros((0, J))
    return matrix


def write_trajectory(trajectory: Trajectory, path: str | Path) -> Path:
    """
    把轨迹写入二进制文件。

    Returns:
        写入的文件路径。
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    states = trajectory.coefficient_matrix()
    increments = _increments_of(trajectory)
    params = trajectory.params
    header = np.zeros(1, dtype=TRAJECTORY_HEADER)
    header[0] = (
        TRAJECTORY_MAGIC,
        _KIND_CODES[trajectory.space.kind],
        trajectory.space.mesh.level,
        trajectory.N,
        states.shape[1],
        increments.shape[1],
        params.tau,
        params.epsilon,
        params.lam,
        trajectory.model.sigma,
        trajectory.model.seed,
    )
    with path.open("wb") as f:
        f.write(header.tobytes())
        f.write(np.ascontiguousarray(states, dtype=_DOUBLE).tobytes())
        f.write(np.ascontiguousarray(increments, dtype=_DOUBLE).tobytes())
    logger.info("轨迹已写入: %s (N=%d, dofs=%d, J=%d)", path, trajectory.N, states.shape[1], increments.shape[1])
    return path


def _read_header(raw: bytes, dtype: np.dtype, magic: bytes, path: Path) -> np.void:
    if len(raw) < dtype.itemsize:
        raise TrajectoryStorageError(f"文件过短，无法读取头部: {path}")
    header = np.frombuffer(raw, dtype=dtype, count=1)[0]
    if bytes(header["magic"]) != magic:
        raise TrajectoryStorageError(f"magic 不符: {path}: {bytes(header['magic'])!r} != {magic!r}")
    return header


def _read_body(raw: bytes, offset: int, shapes: List[tuple], path: Path) -> List[np.ndarray]:
    expected = offset + sum(int(np.prod(s)) for s in shapes) * _DOUBLE.itemsize
    if len(raw) != expected:
        raise TrajectoryStorageError(f"文件长度不符: {path}: {len(raw)} != {expected}")
    out = []
    for shape in shapes:
        count = int(np.prod(shape))
        out.append(np.frombuffer(raw, dtype=_DOUBLE, count=count, offset=offset).reshape(shape).astype(float))
        offset += count * _DOUBLE.itemsize
    return out


def read_trajectory(path: str | Path) -> TrajectoryDump:
    """
    读取轨迹文件。

    Raises:
        TrajectoryStorageError: 格式错误。
    """
    path = Path(path)
    raw = path.read_bytes()
    header = _read_header(raw, TRAJECTORY_HEADER, TRAJECTORY_MAGIC, path)
    kind_code = int(header["kind"])
    if kind_code not in _KIND_NAMES:
        raise TrajectoryStorageError(f"未知的单元类型编码: {kind_code}")
    N, ndof, J = int(header["steps"]), int(header["dofs"]), int(header["components"])
    states, increments = _read_body(raw, TRAJECTORY_HEADER.itemsize, [(N + 1, ndof), (N, J)], path)
    info = {
        "kind": _KIND_NAMES[kind_code],
        "level": int(header["level"]),
        "steps": N,
        "dofs": ndof,
        "components": J,
        "tau": float(header["tau"]),
        "epsilon": float(header["epsilon"]),
        "lam": float(header["lam"]),
        "sigma": float(header["sigma"]),
        "seed": int(header["seed"]),
    }
    return TrajectoryDump(header=info, states=states, increments=increments)


def write_noise(increments: np.ndarray, tau: float, path: str | Path) -> Path:
    """把 shape (N, J) 的噪声增量写入二进制文件。"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    increments = np.atleast_2d(np.asarray(increments, dtype=float))
    header = np.zeros(1, dtype=NOISE_HEADER)
    header[0] = (NOISE_MAGIC, increments.shape[0], increments.shape[1], float(tau))
    with path.open("wb") as f:
        f.write(header.tobytes())
        f.write(np.ascontiguousarray(increments, dtype=_DOUBLE).tobytes())
    return path


def read_noise(path: str | Path) -> NoiseDump:
    """读取噪声文件。"""
    path = Path(path)
    raw = path.read_bytes()
    header = _read_header(raw, NOISE_HEADER, NOISE_MAGIC, path)
    N, J = int(header["steps"]), int(header["components"])
    (increments,) = _read_body(raw, NOISE_HEADER.itemsize, [(N, J)], path)
    return NoiseDump(tau=float(header["tau"]), increments=increments)


def replay_states(
    space: FeSpace,
    x0: np.ndarray,
    increments: np.ndarray,
    g_h: State,
    params: SchemeParams,
    model: NoiseModel,
) -> np.ndarray:
    """
    用给定的增量从 X⁰ 重新积分，返回 shape (N+1, ndof) 的系数矩阵。

    Raises:
        TrajectoryStorageError: 增量行数与 params.N 不符。
    """
    increments = np.asarray(increments, dtype=float)
    if increments.shape[0] != params.N:
        raise TrajectoryStorageError(f"增量行数 {increments.shape[0]} 与步数 N={params.N} 不符")
    states = [State(space, np.asarray(x0, dtype=float))]
    for i in range(1, params.N + 1):
        new, _ = step(space, states[-1], NoiseIncrement(i, increments[i - 1]), g_h, params, model)
        states.append(new)
    return np.vstack([s.coefficients for s in states])
