"""
criss-cross 网格测试
"""

import pathlib
import sys

# 添加项目根目录到路径
project_root = pathlib.Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

import numpy as np
import pytest

from core.mesh import MeshError, build_crisscross, edge_barycenters, write_off


def test_level1_counts():
    """level=1：4 个小正方形、16 个三角形、13 个顶点、8 条边界边。"""
    mesh = build_crisscross(1)
    assert mesh.num_triangles == 16
    assert mesh.num_vertices == 13
    assert mesh.num_edges == 28
    assert int(mesh.boundary_edges.sum()) == 8
    assert mesh.euler_characteristic() == 1
    assert abs(mesh.areas.sum() - 1.0) < 1e-14
    print("[OK] level=1 计数正确")


def test_level2_counts():
    mesh = build_crisscross(2)
    assert mesh.num_triangles == 64
    assert mesh.num_vertices == 41
    assert mesh.num_edges == 104
    print("[OK] level=2 计数正确")


@pytest.mark.parametrize("level", [1, 2, 3, 4])
def test_mesh_invariants(level):
    """面积均为 h²/4 且为正，内部边恰属于两个三角形，边界边属于一个。"""
    mesh = build_crisscross(level)
    n = 2**level
    h = 1.0 / n
    assert mesh.num_vertices == (n + 1) ** 2 + n * n
    assert mesh.num_triangles == 4 * n * n
    assert np.allclose(mesh.signed_areas(), h * h / 4.0, rtol=0, atol=1e-15)
    assert abs(mesh.areas.sum() - 1.0) < 1e-12

    counts = np.bincount(mesh.tri_edges.ravel(), minlength=mesh.num_edges)
    assert np.all(counts[mesh.boundary_edges] == 1)
    assert np.all(counts[~mesh.boundary_edges] == 2)

    # 局部边 k 与局部顶点 k 相对
    for t in range(0, mesh.num_triangles, 7):
        for k in range(3):
            edge = set(mesh.edges[mesh.tri_edges[t, k]].tolist())
            assert mesh.triangles[t, k] not in edge
            assert edge == set(np.delete(mesh.triangles[t], k).tolist())


def test_edge_barycenters():
    mesh = build_crisscross(1)
    midpoints, boundary = edge_barycenters(mesh)
    a = int(np.flatnonzero(np.all(mesh.vertices == [0.0, 0.0], axis=1))[0])
    b = int(np.flatnonzero(np.all(mesh.vertices == [0.5, 0.0], axis=1))[0])
    k = int(np.flatnonzero(np.all(mesh.edges == sorted([a, b]), axis=1))[0])
    assert np.allclose(midpoints[k], [0.25, 0.0])
    assert boundary[k]
    assert np.all((midpoints >= 0.0) & (midpoints <= 1.0))
    print("[OK] 边中点正确")


def test_build_is_deterministic():
    a = build_crisscross(3)
    b = build_crisscross(3)
    assert np.array_equal(a.vertices, b.vertices)
    assert np.array_equal(a.triangles, b.triangles)
    assert np.array_equal(a.edges, b.edges)


@pytest.mark.parametrize("level", [0, -1, 15, 2.5, True])
def test_invalid_level(level):
    with pytest.raises(MeshError):
        build_crisscross(level)


def test_locate():
    """定位结果的重心坐标可以重建原始点。"""
    mesh = build_crisscross(3)
    rng = np.random.default_rng(0)
    points = rng.random((200, 2))
    points = np.vstack([points, [[0.0, 0.0], [1.0, 1.0], [0.5, 0.5], [0.125, 0.0]]])
    tri, bary = mesh.locate(points)
    assert np.all(bary >= -1e-12)
    assert np.allclose(bary.sum(axis=1), 1.0)
    rebuilt = np.einsum("mk,mkd->md", bary, mesh.vertices[mesh.triangles[tri]])
    assert np.allclose(rebuilt, points, atol=1e-13)


def test_locate_outside():
    mesh = build_crisscross(2)
    with pytest.raises(MeshError):
        mesh.locate(np.array([[1.5, 0.5]]))


def test_write_off(tmp_path):
    mesh = build_crisscross(1)
    path = tmp_path / "mesh.off"
    write_off(mesh, path)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "OFF"
    assert lines[1] == "13 16 28"
    assert len(lines) == 2 + 13 + 16


if __name__ == "__main__":
    test_level1_counts()
    test_level2_counts()
    test_edge_barycenters()
