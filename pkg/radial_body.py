"""
径向图凸体 - 以中心点为原点的测地极坐标下的正径向函数
包括参考凸体 (测地球、扰动球、椭球)、面积/体积测量、闭式参考值和JSON序列化
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.special import eval_legendre

from geometry_errors import ConfigError, DomainError, ReportError
from radial_derivatives import grid_derivatives
from sphere_grid import SphereGrid
from spaceform_geometry import (
    Isometry, Point, SpaceformKind, log_and_distance, model_distance, origin,
    polar_coordinates, polar_points, radial_vectors, tangent_frame,
    warp_functions, warp_power_integral,
)

logger = logging.getLogger(__name__)

HEMISPHERE_LIMIT = 0.5 * np.pi


@dataclass(frozen=True, eq=False)
class RadialBody:
    """∂K = {exp_c(ρ(ξ)·Fξ)}, F 为中心处切空间标架"""
    kind: SpaceformKind
    center: Point
    grid: SphereGrid
    rho: np.ndarray
    smoothness_flags: Optional[np.ndarray] = None
    frame: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        if self.center.kind is not self.kind:
            raise DomainError("中心点与凸体的空间形式不一致")
        if self.center.n != self.grid.n:
            raise DomainError(f"网格维数 {self.grid.n} 与中心点维数 {self.center.n} 不一致")
        rho = np.array(self.rho, dtype=float)
        if rho.shape != (len(self.grid),):
            raise DomainError(f"rho 长度 {rho.shape} 与网格节点数 {len(self.grid)} 不一致")
        if not np.all(np.isfinite(rho)) or np.any(rho <= 0):
            raise DomainError("径向函数必须处处为正且有限")
        if self.kind is SpaceformKind.SPHERICAL and np.any(rho >= HEMISPHERE_LIMIT):
            raise DomainError("球面凸体必须位于中心的开半球内 (rho < π/2)")
        flags = (np.ones(rho.size, dtype=bool) if self.smoothness_flags is None
                 else np.array(self.smoothness_flags, dtype=bool))
        if flags.shape != rho.shape:
            raise DomainError("smoothness_flags 长度与节点数不一致")
        frame = tangent_frame(self.center) if self.frame is None else np.array(self.frame, dtype=float)
        for name, arr in (("rho", rho), ("smoothness_flags", flags), ("frame", frame)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def directions(self) -> np.ndarray:
        """节点方向在模型坐标中的切向量 Fξ"""
        return self.grid.nodes @ self.frame.T

    @property
    def boundary_points(self) -> np.ndarray:
        return polar_points(self.kind, self.center.coords, self.frame, self.rho, self.grid.nodes)

    @property
    def radial_unit_vectors(self) -> np.ndarray:
        return radial_vectors(self.kind, self.center.coords, self.frame, self.rho, self.grid.nodes)

    def with_rho(self, rho: np.ndarray, smoothness_flags: Optional[np.ndarray] = None) -> "RadialBody":
        flags = self.smoothness_flags if smoothness_flags is None else smoothness_flags
        return RadialBody(self.kind, self.center, self.grid, rho, flags, self.frame)

    def transformed(self, isometry: Isometry) -> "RadialBody":
        """对 (中心, 凸体) 施加环境等距"""
        center = Point(self.kind, isometry.apply(self.center.coords[None, :])[0])
        frame = isometry.apply_vectors(self.frame.T).T
        return RadialBody(self.kind, center, self.grid, self.rho, self.smoothness_flags, frame)

    def permuted(self, perm: np.ndarray) -> "RadialBody":
        perm = np.asarray(perm, dtype=int)
        return RadialBody(self.kind, self.center, self.grid.permuted(perm), self.rho[perm],
                          self.smoothness_flags[perm], self.frame)


def _resolve_center(kind: SpaceformKind, grid: SphereGrid, center: Optional[Point]) -> Point:
    return origin(kind, grid.n) if center is None else center


def _check_ball_radius(kind: SpaceformKind, radius: float):
    if not radius > 0:
        raise DomainError(f"球半径必须为正: {radius}")
    if kind is SpaceformKind.SPHERICAL and radius >= HEMISPHERE_LIMIT:
        raise DomainError("球面上的测地球半径必须小于π/2")


def make_ball(kind: SpaceformKind, radius: float, grid: SphereGrid,
              center: Optional[Point] = None) -> RadialBody:
    _check_ball_radius(kind, radius)
    return RadialBody(kind, _resolve_center(kind, grid, center), grid, np.full(len(grid), float(radius)))


def harmonic_profile(grid: SphereGrid, mode: int) -> np.ndarray:
    """低频角向剖面: n=1 为 cos(kθ), n=2 为带状Legendre多项式 P_k(ξ_z)"""
    if mode < 0:
        raise DomainError(f"谐波阶数必须非负: {mode}")
    if grid.n == 1:
        return np.cos(mode * np.arctan2(grid.nodes[:, 1], grid.nodes[:, 0]))
    return eval_legendre(mode, grid.nodes[:, 2])


def make_perturbed_ball(kind: SpaceformKind, radius: float, grid: SphereGrid,
                        amplitude: float, mode: int,
                        center: Optional[Point] = None) -> RadialBody:
    """rho = R + amplitude·profile"""
    _check_ball_radius(kind, radius)
    rho = radius + amplitude * harmonic_profile(grid, mode)
    if np.any(rho <= 0):
        raise DomainError(f"振幅 {amplitude} 使径向函数非正")
    if kind is SpaceformKind.SPHERICAL and np.any(rho >= HEMISPHERE_LIMIT):
        raise DomainError(f"振幅 {amplitude} 使球面凸体越出半球")
    return RadialBody(kind, _resolve_center(kind, grid, center), grid, rho)


def make_ellipsoid(kind: SpaceformKind, axes: Sequence[float], grid: SphereGrid,
                   center: Optional[Point] = None) -> RadialBody:
    """rho(ξ) = (Σ ξ_i²/a_i²)^(-1/2); 欧氏空间中为精确的椭圆/椭球"""
    axes = np.asarray(axes, dtype=float)
    if axes.shape != (grid.n + 1,) or np.any(axes <= 0):
        raise DomainError(f"半轴需要 {grid.n + 1} 个正数: {axes}")
    rho = 1.0 / np.sqrt(np.sum(grid.nodes ** 2 / axes[None, :] ** 2, axis=1))
    return RadialBody(kind, _resolve_center(kind, grid, center), grid, rho)


# ---------------------------------------------------------------------------
# 测量
# ---------------------------------------------------------------------------

def polygon_perimeter(body: RadialBody) -> float:
    """n=1: 相邻边界点之间测地距离之和"""
    if body.n != 1:
        raise DomainError("多边形周长只对 n=1 定义")
    points = body.boundary_points[body.grid.angular_order]
    return float(np.sum(model_distance(body.kind, points, np.roll(points, -1, axis=0))))


def area_elements(body: RadialBody, gradient: Optional[np.ndarray] = None) -> np.ndarray:
    """每个节点的曲面测度 w·ϑ^(n-1)·sqrt(ϑ² + |∇ρ|²)"""
    if gradient is None:
        gradient = grid_derivatives(body.grid, body.rho, body.smoothness_flags).grad
    theta, _, _ = warp_functions(body.kind, body.rho)
    grad_sq = np.sum(np.asarray(gradient) ** 2, axis=1)
    return body.grid.weights * theta ** (body.n - 1) * np.sqrt(theta ** 2 + grad_sq)


def measure_volume(body: RadialBody) -> float:
    return float(np.sum(body.grid.weights * warp_power_integral(body.kind, body.rho, body.n)))


def measure(body: RadialBody) -> Tuple[float, float]:
    """返回 (面积, 体积); 带非光滑节点的 n=1 凸体按测地多边形计算周长"""
    volume = measure_volume(body)
    if body.n == 1 and not np.all(body.smoothness_flags):
        area = polygon_perimeter(body)
    else:
        area = float(np.sum(area_elements(body)))
    return area, volume


# ---------------------------------------------------------------------------
# 闭式参考值
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClosedFormReference:
    """闭式参考体; n=1 时 area 为周长, volume 为围成面积"""
    name: str
    parameters: Dict[str, Any]
    area: float
    volume: float


def _positive(name: str, value: float):
    if not value > 0:
        raise DomainError(f"{name} 必须为正: {value}")


def reference_closed_forms(name: str, parameters: Dict[str, Any]) -> ClosedFormReference:
    """ball / sausage / lens2d / lens3d 的面积与体积"""
    params = dict(parameters)
    if name == "ball":
        kind = params["kind"]
        kind = kind if isinstance(kind, SpaceformKind) else SpaceformKind.from_label(kind)
        n, radius = int(params.get("n", 2)), float(params["R"])
        _check_ball_radius(kind, radius)
        theta, _, _ = warp_functions(kind, radius)
        sphere = 2.0 * np.pi if n == 1 else 4.0 * np.pi
        area = sphere * theta ** n
        volume = sphere * warp_power_integral(kind, radius, n)
    elif name == "sausage":
        lam, length = float(params["lam"]), float(params["L"])
        _positive("lam", lam)
        if length < 0:
            raise DomainError(f"线段长度必须非负: {length}")
        area = 4.0 * np.pi / lam ** 2 + 2.0 * np.pi * length / lam
        volume = 4.0 * np.pi / (3.0 * lam ** 3) + np.pi * length / lam ** 2
    elif name in ("lens2d", "lens3d"):
        lam, d = float(params["lam"]), float(params["d"])
        _positive("lam", lam)
        if not 0.0 < d < 2.0 / lam:
            raise DomainError(f"中心距离必须满足 0 < d < 2/λ: d={d}")
        radius = 1.0 / lam
        if name == "lens2d":
            alpha = np.arccos(0.5 * d * lam)
            area = 4.0 * alpha * radius
            volume = (2.0 * alpha - np.sin(2.0 * alpha)) * radius ** 2
        else:
            height = radius - 0.5 * d
            area = 2.0 * (2.0 * np.pi * radius * height)
            volume = 2.0 * (np.pi * height ** 2 * (3.0 * radius - height) / 3.0)
    else:
        raise DomainError(f"未知的参考体: {name}")
    return ClosedFormReference(name=name, parameters={k: (v.label if isinstance(v, SpaceformKind) else v)
                                                      for k, v in params.items()},
                               area=float(area), volume=float(volume))


# ---------------------------------------------------------------------------
# 包含判定
# ---------------------------------------------------------------------------

def contains_points(body: RadialBody, points: np.ndarray, slack: float = 0.0) -> np.ndarray:
    """逐点判定 d(c, p) ≤ ρ(方向) + slack"""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    dist, directions = polar_coordinates(body.kind, body.center.coords, body.frame, points)
    inside = dist <= slack
    rest = ~inside
    if np.any(rest):
        radius = body.grid.interpolate(body.rho, directions[rest])
        inside[rest] = dist[rest] <= radius + slack
    return inside


def contains(body: RadialBody, p: Point) -> bool:
    if p.kind is not body.kind:
        raise DomainError("点与凸体的空间形式不一致")
    log_and_distance(body.center, p)
    return bool(contains_points(body, p.coords[None, :])[0])


# ---------------------------------------------------------------------------
# JSON 序列化
# ---------------------------------------------------------------------------

def body_to_dict(body: RadialBody) -> Dict[str, Any]:
    return {
        "kind": body.kind.label,
        "n": body.n,
        "center": body.center.coords.tolist(),
        "frame": body.frame.tolist(),
        "grid": body.grid.describe(),
        "rho": body.rho.tolist(),
        "smooth": body.smoothness_flags.tolist(),
    }


def body_from_dict(document: Dict[str, Any]) -> RadialBody:
    try:
        kind = SpaceformKind.from_label(document["kind"])
        grid = SphereGrid.from_descriptor(document["grid"])
        if int(document["n"]) != grid.n:
            raise ConfigError("凸体文档中的 n 与网格描述符不一致")
        return RadialBody(
            kind=kind,
            center=Point(kind, np.asarray(document["center"], dtype=float)),
            grid=grid,
            rho=np.asarray(document["rho"], dtype=float),
            smoothness_flags=np.asarray(document.get("smooth", [True] * len(grid)), dtype=bool),
            frame=np.asarray(document["frame"], dtype=float) if "frame" in document else None,
        )
    except KeyError as e:
        raise ConfigError(f"凸体文档缺少字段: {e}") from e


def save_body(body: RadialBody, path: Path):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(body_to_dict(body), sort_keys=True), encoding="utf-8")
    except OSError as e:
        raise ReportError(f"无法写入凸体文件: {e}", str(path)) from e


def load_body(path: Path) -> RadialBody:
    path = Path(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"无法读取凸体文件 {path}: {e}") from e
    return body_from_dict(document)
