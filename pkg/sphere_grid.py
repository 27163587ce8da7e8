"""
单位球面采样网格 - 径向函数的定义域
n=1: 圆周上N个均匀角度; n=2: 第L层细分的二十面体球网格
提供求积权重、邻接结构、局部标架与插值
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy import sparse
from scipy.interpolate import CubicSpline

from geometry_errors import DomainError

logger = logging.getLogger(__name__)

DEFAULT_CIRCLE_SIZE = 512
DEFAULT_ICOSPHERE_LEVEL = 5
INTERPOLATION_CHUNK = 256

_ICOSAHEDRON_FACES = np.array([
    (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
    (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
    (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
    (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
])


def _icosahedron_vertices() -> np.ndarray:
    t = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array([
        (-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
        (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
        (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1),
    ], dtype=float)
    return verts / np.linalg.norm(verts, axis=1, keepdims=True)


def _subdivide(vertices: List[np.ndarray], faces: np.ndarray) -> np.ndarray:
    """每个三角形一分为四, 中点投影回球面"""
    cache: Dict[Tuple[int, int], int] = {}

    def midpoint(i: int, j: int) -> int:
        key = (i, j) if i < j else (j, i)
        if key not in cache:
            mid = vertices[i] + vertices[j]
            vertices.append(mid / np.linalg.norm(mid))
            cache[key] = len(vertices) - 1
        return cache[key]

    refined = []
    for a, b, c in faces:
        ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
        refined.extend([(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)])
    return np.array(refined, dtype=int)


def _orient_outward(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    a, b, c = (vertices[faces[:, k]] for k in range(3))
    flip = np.einsum("ij,ij->i", np.cross(b - a, c - a), a + b + c) < 0
    oriented = faces.copy()
    oriented[flip, 1], oriented[flip, 2] = faces[flip, 2], faces[flip, 1]
    return oriented


def spherical_triangle_areas(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """单位球面三角形的球面角盈 (逐行)"""
    triple = np.abs(np.einsum("ij,ij->i", a, np.cross(b, c)))
    denom = 1.0 + np.einsum("ij,ij->i", a, b) + np.einsum("ij,ij->i", b, c) + np.einsum("ij,ij->i", c, a)
    return 2.0 * np.arctan2(triple, denom)


def local_frames(directions: np.ndarray) -> np.ndarray:
    """S^2 上每个方向处切平面的标准正交基, 形状 (N, 2, 3)"""
    directions = np.asarray(directions, dtype=float)
    axis = np.eye(3)[np.argmin(np.abs(directions), axis=1)]
    e1 = axis - np.sum(axis * directions, axis=1, keepdims=True) * directions
    e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
    e2 = np.cross(directions, e1)
    return np.stack([e1, e2], axis=1)


def sphere_exp(base: np.ndarray, frames: np.ndarray, coords: np.ndarray) -> np.ndarray:
    """S^2 指数坐标 -> 单位向量; coords 形状 (..., 2)"""
    tangent = np.einsum("...k,...kj->...j", coords, frames)
    length = np.linalg.norm(tangent, axis=-1)
    return np.cos(length)[..., None] * base + np.sinc(length / np.pi)[..., None] * tangent


def sphere_log(base: np.ndarray, frames: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """单位向量 -> base 处的指数坐标, 形状 (..., 2)"""
    inner = np.sum(base * targets, axis=-1)
    residual = targets - inner[..., None] * base
    sine = np.linalg.norm(residual, axis=-1)
    angle = np.arctan2(sine, inner)
    safe = np.where(sine > 0, sine, 1.0)
    tangent = residual * np.where(sine > 0, angle / safe, 1.0)[..., None]
    return np.einsum("...j,...kj->...k", tangent, frames)


@dataclass(frozen=True, eq=False)
class SphereGrid:
    """单位n维球面上的节点、权重和邻接信息"""
    n: int
    nodes: np.ndarray
    weights: np.ndarray
    size: int
    level: Optional[int] = None
    faces: Optional[np.ndarray] = None
    permutation: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        if self.n not in (1, 2):
            raise DomainError(f"只支持 n ∈ {{1, 2}}, 收到 n={self.n}")
        for name in ("nodes", "weights"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if np.any(self.weights <= 0):
            raise DomainError("求积权重必须为正")

    def __len__(self) -> int:
        return self.nodes.shape[0]

    @property
    def total_measure(self) -> float:
        return 2.0 * np.pi if self.n == 1 else 4.0 * np.pi

    @cached_property
    def angles(self) -> np.ndarray:
        """n=1 节点的极角 ∈ [0, 2π)"""
        return np.mod(np.arctan2(self.nodes[:, 1], self.nodes[:, 0]), 2.0 * np.pi)

    @cached_property
    def angular_order(self) -> np.ndarray:
        """n=1 节点按极角排序的下标"""
        return np.argsort(self.angles, kind="stable")

    @cached_property
    def spacing(self) -> float:
        """相邻节点的平均角距离"""
        if self.n == 1:
            return 2.0 * np.pi / len(self)
        rows, cols = self.adjacency.nonzero()
        dots = np.clip(np.sum(self.nodes[rows] * self.nodes[cols], axis=1), -1.0, 1.0)
        return float(np.mean(np.arccos(dots)))

    @cached_property
    def adjacency(self) -> sparse.csr_matrix:
        """一环邻接矩阵 (n=1 为圆周相邻关系)"""
        count = len(self)
        if self.n == 1:
            order = self.angular_order
            rows = np.concatenate([order, np.roll(order, -1)])
            cols = np.concatenate([np.roll(order, -1), order])
        else:
            f = self.faces
            rows = np.concatenate([f[:, 0], f[:, 1], f[:, 2], f[:, 1], f[:, 2], f[:, 0]])
            cols = np.concatenate([f[:, 1], f[:, 2], f[:, 0], f[:, 0], f[:, 1], f[:, 2]])
        data = np.ones(rows.size)
        matrix = sparse.csr_matrix((data, (rows, cols)), shape=(count, count))
        matrix.data[:] = 1.0
        return matrix

    def ring_table(self, rings: int = 2) -> Tuple[np.ndarray, np.ndarray]:
        """k环邻居表 (不含自身), 以 -1 填充; 返回 (下标表, 有效掩码)"""
        reach = self.adjacency + sparse.identity(len(self), format="csr")
        power = reach.copy()
        for _ in range(rings - 1):
            power = power @ reach
        power = power.tolil()
        lists = []
        for i, row in enumerate(power.rows):
            lists.append([j for j in row if j != i])
        width = max(len(row) for row in lists)
        table = np.full((len(self), width), -1, dtype=int)
        for i, row in enumerate(lists):
            table[i, :len(row)] = row
        return table, table >= 0

    @cached_property
    def two_ring(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.ring_table(2)

    @cached_property
    def frames(self) -> np.ndarray:
        """n=2 节点切平面标架"""
        if self.n != 2:
            raise DomainError("局部标架只对 n=2 网格定义")
        return local_frames(self.nodes)

    @cached_property
    def _face_planes(self) -> Tuple[np.ndarray, np.ndarray]:
        a, b, c = (self.nodes[self.faces[:, k]] for k in range(3))
        normals = np.cross(b - a, c - a)
        normals /= np.linalg.norm(normals, axis=1, keepdims=True)
        offsets = np.sum(normals * a, axis=1)
        return normals, offsets

    def interpolate(self, values: np.ndarray, directions: np.ndarray) -> np.ndarray:
        """在任意单位方向处插值节点值 (n=1 周期三次样条, n=2 面上重心线性插值)"""
        values = np.asarray(values, dtype=float)
        directions = np.atleast_2d(np.asarray(directions, dtype=float))
        if self.n == 1:
            order = self.angular_order
            theta = self.angles[order]
            knots = np.append(theta, theta[0] + 2.0 * np.pi)
            samples = np.append(values[order], values[order][0])
            spline = CubicSpline(knots, samples, bc_type="periodic")
            query = np.mod(np.arctan2(directions[:, 1], directions[:, 0]) - theta[0], 2.0 * np.pi) + theta[0]
            return spline(query)

        normals, offsets = self._face_planes
        result = np.empty(directions.shape[0])
        for start in range(0, directions.shape[0], INTERPOLATION_CHUNK):
            block = directions[start:start + INTERPOLATION_CHUNK]
            hit = np.argmax((block @ normals.T) / offsets[None, :], axis=1)
            tri = self.faces[hit]
            a, b, c = (self.nodes[tri[:, k]] for k in range(3))
            scale = offsets[hit] / np.sum(normals[hit] * block, axis=1)
            point = block * scale[:, None]
            total = np.linalg.norm(np.cross(b - a, c - a), axis=1)
            wa = np.linalg.norm(np.cross(b - point, c - point), axis=1) / total
            wb = np.linalg.norm(np.cross(c - point, a - point), axis=1) / total
            wc = 1.0 - wa - wb
            result[start:start + block.shape[0]] = (
                wa * values[tri[:, 0]] + wb * values[tri[:, 1]] + wc * values[tri[:, 2]]
            )
        return result

    def permuted(self, perm: np.ndarray) -> "SphereGrid":
        """按 perm 重新编号节点 (新节点 i = 旧节点 perm[i])"""
        perm = np.asarray(perm, dtype=int)
        if sorted(perm.tolist()) != list(range(len(self))):
            raise DomainError("perm 必须是节点下标的一个排列")
        faces = None
        if self.faces is not None:
            inverse = np.empty_like(perm)
            inverse[perm] = np.arange(perm.size)
            faces = inverse[self.faces]
        base = self.permutation if self.permutation is not None else np.arange(len(self))
        return SphereGrid(
            n=self.n, nodes=self.nodes[perm], weights=self.weights[perm], size=self.size,
            level=self.level, faces=faces, permutation=base[perm],
        )

    def describe(self) -> Dict[str, Any]:
        """JSON网格描述符"""
        descriptor: Dict[str, Any] = {"n": self.n}
        if self.n == 1:
            descriptor["size"] = self.size
        else:
            descriptor["level"] = self.level
        descriptor["permutation"] = None if self.permutation is None else self.permutation.tolist()
        return descriptor

    @classmethod
    def from_descriptor(cls, descriptor: Dict[str, Any]) -> "SphereGrid":
        n = int(descriptor["n"])
        if n == 1:
            grid = circle_grid(int(descriptor["size"]))
        elif n == 2:
            grid = icosphere_grid(int(descriptor["level"]))
        else:
            raise DomainError(f"未知的网格维数: {n}")
        perm = descriptor.get("permutation")
        return grid if perm is None else grid.permuted(np.asarray(perm, dtype=int))


def circle_grid(size: int = DEFAULT_CIRCLE_SIZE) -> SphereGrid:
    """S^1 上的均匀网格"""
    if size < 8:
        raise DomainError(f"圆周网格至少需要8个节点: {size}")
    theta = 2.0 * np.pi * np.arange(size) / size
    nodes = np.column_stack([np.cos(theta), np.sin(theta)])
    weights = np.full(size, 2.0 * np.pi / size)
    return SphereGrid(n=1, nodes=nodes, weights=weights, size=size)


_ICOSPHERE_CACHE: Dict[int, Tuple[np.ndarray, np.ndarray]] = {}


def icosphere_grid(level: int = DEFAULT_ICOSPHERE_LEVEL) -> SphereGrid:
    """S^2 上的二十面体细分网格, 权重为球面三角形面积的三分之一之和"""
    if level < 0 or level > 7:
        raise DomainError(f"细分层数必须在 0..7 之间: {level}")
    if level not in _ICOSPHERE_CACHE:
        vertices = list(_icosahedron_vertices())
        faces = _ICOSAHEDRON_FACES.copy()
        for _ in range(level):
            faces = _subdivide(vertices, faces)
        verts = np.array(vertices)
        _ICOSPHERE_CACHE[level] = (verts, _orient_outward(verts, faces))
        logger.debug("icosphere level %d: %d vertices", level, len(verts))
    verts, faces = _ICOSPHERE_CACHE[level]
    areas = spherical_triangle_areas(verts[faces[:, 0]], verts[faces[:, 1]], verts[faces[:, 2]])
    weights = np.zeros(len(verts))
    for k in range(3):
        np.add.at(weights, faces[:, k], areas / 3.0)
    return SphereGrid(n=2, nodes=verts.copy(), weights=weights, size=len(verts),
                      level=level, faces=faces.copy())


def make_grid(n: int, size: Optional[int] = None, level: Optional[int] = None) -> SphereGrid:
    if n == 1:
        return circle_grid(size or DEFAULT_CIRCLE_SIZE)
    if n == 2:
        return icosphere_grid(DEFAULT_ICOSPHERE_LEVEL if level is None else level)
    raise DomainError(f"只支持 n ∈ {{1, 2}}, 收到 n={n}")
