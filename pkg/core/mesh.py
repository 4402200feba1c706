"""
criss-cross 三角网格

单位正方形 [0,1]² 先剖分为边长 h = 2^{-level} 的小正方形，
每个小正方形再由两条对角线分成四个全等的直角三角形。

编号约定（属于接口的一部分，噪声下标 ξ^{i,j} 依赖它保持可复现）：
- 顶点：先按行优先（y 为行、x 为列）排列网格节点，再按同样顺序排列小正方形中心。
- 三角形：逐个小正方形依次为 south、east、north、west，顶点逆时针。
- 边：按 (较小顶点号, 较大顶点号) 字典序排列。
- tri_edges[t, k] 是三角形 t 中与局部顶点 k 相对的边。
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Tuple

import numpy as np

from utils.logger import get_logger


logger = get_logger()

# 超过此层数时三角形数超出 32 位稀疏矩阵下标范围
MAX_MESH_LEVEL = 14

# 点定位时允许的越界容差
LOCATE_TOLERANCE = 1e-12


class MeshError(ValueError):
    """网格构造或查询错误。"""


def _freeze(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class Mesh:
    """
    不可变的 criss-cross 网格。

    Attributes:
        level: 网格层数 ℓ，h = 2^{-ℓ}。
        vertices: 顶点坐标，shape (nv, 2)。
        triangles: 三角形顶点编号（逆时针），shape (nt, 3)。
        edges: 边端点编号，shape (ne, 2)。
        tri_edges: 三角形的三条边（局部边 k 与局部顶点 k 相对），shape (nt, 3)。
        edge_midpoints: 边中点（即边的重心 b_S），shape (ne, 2)。
        boundary_vertices: 顶点是否在 ∂O 上。
        boundary_edges: 边是否在 ∂O 上。
        areas: 三角形面积，均为 h²/4。
    """

    level: int
    vertices: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray
    tri_edges: np.ndarray
    edge_midpoints: np.ndarray
    boundary_vertices: np.ndarray
    boundary_edges: np.ndarray
    areas: np.ndarray

    @property
    def n_cells(self) -> int:
        """每个方向上的小正方形个数。"""
        return 2 ** self.level

    @property
    def h(self) -> float:
        return 1.0 / self.n_cells

    @property
    def num_vertices(self) -> int:
        return int(self.vertices.shape[0])

    @property
    def num_triangles(self) -> int:
        return int(self.triangles.shape[0])

    @property
    def num_edges(self) -> int:
        return int(self.edges.shape[0])

    def signed_areas(self) -> np.ndarray:
        """按顶点顺序计算的有向面积，逆时针为正。"""
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def euler_characteristic(self) -> int:
        """V - E + F（只把三角形算作面），对单位正方形应为 1。"""
        return self.num_vertices - self.num_edges + self.num_triangles

    def locate(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        定位点所在的三角形并给出重心坐标。

        criss-cross 结构下定位是闭式的：先确定小正方形，
        再根据相对中心的偏移判断落在四个三角形中的哪一个。
        位于公共边上的点归入其中任意一个三角形。

        Args:
            points: shape (m, 2) 的坐标。

        Returns:
            (三角形编号 shape (m,), 重心坐标 shape (m, 3))

        Raises:
            MeshError: 点落在 [0,1]² 之外。
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        x, y = pts[:, 0], pts[:, 1]
        if np.any((x < -LOCATE_TOLERANCE) | (x > 1 + LOCATE_TOLERANCE) | (y < -LOCATE_TOLERANCE) | (y > 1 + LOCATE_TOLERANCE)):
            raise MeshError("点定位失败: 存在位于单位正方形之外的点")

        n = self.n_cells
        h = self.h
        col = np.clip(np.floor(x * n).astype(np.int64), 0, n - 1)
        row = np.clip(np.floor(y * n).astype(np.int64), 0, n - 1)
        dx = x - (col + 0.5) * h
        dy = y - (row + 0.5) * h
        ax = np.abs(dx)
        local = np.where(dy <= -ax, 0, np.where(dy >= ax, 2, np.where(dx > 0, 1, 3)))
        tri = (row * n + col) * 4 + local

        corners = self.vertices[self.triangles[tri]]
        e1 = corners[:, 1] - corners[:, 0]
        e2 = corners[:, 2] - corners[:, 0]
        rel = pts - corners[:, 0]
        det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        l1 = (rel[:, 0] * e2[:, 1] - rel[:, 1] * e2[:, 0]) / det
        l2 = (e1[:, 0] * rel[:, 1] - e1[:, 1] * rel[:, 0]) / det
        bary = np.column_stack([1.0 - l1 - l2, l1, l2])
        return tri, bary


def build_crisscross(level: int) -> Mesh:
    """
    构造 level 层的 criss-cross 网格。

    Args:
        level: 网格层数，1 <= level <= MAX_MESH_LEVEL。

    Returns:
        Mesh 实例；同一 level 的结果逐位相同。

    Raises:
        MeshError: level 非整数或越界。
    """
    if isinstance(level, bool) or not isinstance(level, (int, np.integer)):
        raise MeshError(f"网格层数必须是整数, got {level!r}")
    level = int(level)
    if level < 1 or level > MAX_MESH_LEVEL:
        raise MeshError(f"网格层数必须在 [1, {MAX_MESH_LEVEL}] 内, got {level}")

    n = 2 ** level
    h = 1.0 / n

    # 网格节点（行优先）与小正方形中心
    rows, cols = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
    grid = np.column_stack([cols.ravel() * h, rows.ravel() * h])
    r, c = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    r = r.ravel().astype(np.int64)
    c = c.ravel().astype(np.int64)
    centers = np.column_stack([(c + 0.5) * h, (r + 0.5) * h])
    vertices = np.vstack([grid, centers])

    bl = r * (n + 1) + c
    br = bl + 1
    tl = bl + (n + 1)
    tr = tl + 1
    ctr = (n + 1) ** 2 + r * n + c
    per_square = np.stack(
        [
            np.stack([bl, br, ctr], axis=1),  # south
            np.stack([br, tr, ctr], axis=1),  # east
            np.stack([tr, tl, ctr], axis=1),  # north
            np.stack([tl, bl, ctr], axis=1),  # west
        ],
        axis=1,
    )
    triangles = per_square.reshape(-1, 3)

    # 局部边 k 与局部顶点 k 相对
    local_edges = triangles[:, [[1, 2], [2, 0], [0, 1]]].reshape(-1, 2)
    keys = np.sort(local_edges, axis=1)
    edges, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    tri_edges = np.asarray(inverse).ravel().reshape(-1, 3)
    boundary_edges = counts == 1

    boundary_vertices = np.zeros(vertices.shape[0], dtype=bool)
    boundary_vertices[edges[boundary_edges].ravel()] = True

    edge_midpoints = 0.5 * (vertices[edges[:, 0]] + vertices[edges[:, 1]])

    p = vertices[triangles]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    areas = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    mesh = Mesh(
        level=level,
        vertices=_freeze(vertices),
        triangles=_freeze(triangles),
        edges=_freeze(edges),
        tri_edges=_freeze(tri_edges),
        edge_midpoints=_freeze(edge_midpoints),
        boundary_vertices=_freeze(boundary_vertices),
        boundary_edges=_freeze(boundary_edges),
        areas=_freeze(areas),
    )
    logger.debug(
        "criss-cross 网格构造完成: level=%d, 顶点=%d, 边=%d, 三角形=%d",
        level,
        mesh.num_vertices,
        mesh.num_edges,
        mesh.num_triangles,
    )
    return mesh


def edge_barycenters(mesh: Mesh) -> Tuple[np.ndarray, np.ndarray]:
    """
    返回每条边的重心 b_S 及其是否位于边界。

    Returns:
        (shape (ne, 2) 的中点坐标, shape (ne,) 的边界标记)
    """
    return mesh.edge_midpoints, mesh.boundary_edges


def write_off(mesh: Mesh, path: str | Path) -> None:
    """
    以类 OFF 纯文本格式导出网格（调试用）：先顶点表，再三角形表。
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        f.write("OFF\n")
        f.write(f"{mesh.num_vertices} {mesh.num_triangles} {mesh.num_edges}\n")
        for x, y in mesh.vertices:
            f.write(f"{x:.17g} {y:.17g} 0\n")
        for a, b, c in mesh.triangles:
            f.write(f"3 {a} {b} {c}\n")
    logger.info("网格已导出: 文件=%s, level=%d", path, mesh.level)
