"""
空间形式几何模块 - 欧氏空间E、球面S、双曲空间H的精确几何
提供翘曲函数ϑ、曲率-半径换算、指数/对数映射、测地线插值和Killing场

模型坐标约定:
- E^{n+1}: R^{n+1} 中的普通坐标
- S^{n+1}: R^{n+2} 中的单位向量
- H^{n+1}: 双曲面模型, Minkowski内积 <x,y> = -x0*y0 + Σ xi*yi, <x,x> = -1, x0 > 0
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple, Union

import numpy as np
from scipy.linalg import expm

from geometry_errors import DomainError

logger = logging.getLogger(__name__)

INVARIANT_TOL = 1e-12
ANTIPODAL_TOL = 1e-12

ArrayLike = Union[float, np.ndarray]


class SpaceformKind(Enum):
    """三种常曲率环境空间"""
    EUCLIDEAN = "Euclidean"
    SPHERICAL = "Spherical"
    HYPERBOLIC = "Hyperbolic"

    @property
    def label(self) -> str:
        return self.value

    @property
    def sectional_curvature(self) -> int:
        return _SECTIONAL_CURVATURE[self]

    def ricci_normal(self, n: int) -> int:
        """Ric_Σ(ν,ν) = n·K"""
        return n * self.sectional_curvature

    def model_dimension(self, n: int) -> int:
        """超曲面维数为n时模型坐标向量的长度"""
        return n + 1 if self is SpaceformKind.EUCLIDEAN else n + 2

    @classmethod
    def from_label(cls, text: str) -> "SpaceformKind":
        key = str(text).strip().lower()
        for kind, aliases in _ALIASES.items():
            if key in aliases:
                return kind
        raise DomainError(f"未知的空间形式: {text!r}")


_SECTIONAL_CURVATURE = {
    SpaceformKind.EUCLIDEAN: 0,
    SpaceformKind.SPHERICAL: 1,
    SpaceformKind.HYPERBOLIC: -1,
}

_ALIASES = {
    SpaceformKind.EUCLIDEAN: {"e", "euclidean", "euclid", "flat"},
    SpaceformKind.SPHERICAL: {"s", "spherical", "sphere"},
    SpaceformKind.HYPERBOLIC: {"h", "hyperbolic", "hyperboloid"},
}


# ---------------------------------------------------------------------------
# 内积与模型坐标工具
# ---------------------------------------------------------------------------

def model_dot(kind: SpaceformKind, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """模型内积 (最后一维求和, 支持广播)"""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if kind is SpaceformKind.HYPERBOLIC:
        return np.sum(x[..., 1:] * y[..., 1:], axis=-1) - x[..., 0] * y[..., 0]
    return np.sum(x * y, axis=-1)


def tangent_norm(kind: SpaceformKind, vectors: np.ndarray) -> np.ndarray:
    return np.sqrt(np.maximum(model_dot(kind, vectors, vectors), 0.0))


def project_to_tangent(kind: SpaceformKind, points: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    """把模型向量投影到各点的切空间"""
    points = np.asarray(points, dtype=float)
    vectors = np.asarray(vectors, dtype=float)
    if kind is SpaceformKind.EUCLIDEAN:
        return vectors.copy()
    if kind is SpaceformKind.SPHERICAL:
        return vectors - np.sum(vectors * points, axis=-1)[..., None] * points
    return vectors + model_dot(kind, vectors, points)[..., None] * points


def _renormalize(kind: SpaceformKind, points: np.ndarray) -> np.ndarray:
    if kind is SpaceformKind.SPHERICAL:
        return points / np.linalg.norm(points, axis=-1, keepdims=True)
    if kind is SpaceformKind.HYPERBOLIC:
        fixed = np.array(points, dtype=float, copy=True)
        fixed[..., 0] = np.sqrt(1.0 + np.sum(fixed[..., 1:] ** 2, axis=-1))
        return fixed
    return points


# ---------------------------------------------------------------------------
# 值类型
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Point:
    """空间形式中的点 (模型坐标)"""
    kind: SpaceformKind
    coords: np.ndarray

    def __post_init__(self):
        coords = np.array(self.coords, dtype=float)
        if coords.ndim != 1 or coords.size < 2 or not np.all(np.isfinite(coords)):
            raise DomainError(f"非法的点坐标: {coords}")
        scale = 1.0 + float(np.dot(coords, coords))
        if self.kind is SpaceformKind.SPHERICAL:
            if abs(float(np.dot(coords, coords)) - 1.0) > INVARIANT_TOL * scale:
                raise DomainError("球面点必须是单位向量")
        elif self.kind is SpaceformKind.HYPERBOLIC:
            if abs(float(model_dot(self.kind, coords, coords)) + 1.0) > INVARIANT_TOL * scale:
                raise DomainError("双曲面点必须满足 <x,x>_M = -1")
            if coords[0] < 1.0 - INVARIANT_TOL * scale:
                raise DomainError("双曲面点必须位于上叶 (x0 ≥ 1)")
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)

    @property
    def n(self) -> int:
        """以该点为环境的超曲面维数"""
        extra = 1 if self.kind is SpaceformKind.EUCLIDEAN else 2
        return self.coords.size - extra


@dataclass(frozen=True, eq=False)
class TangentVector:
    """base处的切向量"""
    base: Point
    vec: np.ndarray

    def __post_init__(self):
        vec = np.array(self.vec, dtype=float)
        if vec.shape != self.base.coords.shape or not np.all(np.isfinite(vec)):
            raise DomainError("切向量长度与基点不匹配")
        kind = self.base.kind
        if kind is not SpaceformKind.EUCLIDEAN:
            inner = float(model_dot(kind, self.base.coords, vec))
            scale = (1.0 + float(np.linalg.norm(vec))) * (1.0 + float(np.linalg.norm(self.base.coords)))
            if abs(inner) > INVARIANT_TOL * scale:
                raise DomainError(f"向量不在切空间中 (内积 {inner:.3e})")
        vec.setflags(write=False)
        object.__setattr__(self, "vec", vec)

    @property
    def kind(self) -> SpaceformKind:
        return self.base.kind

    @property
    def norm(self) -> float:
        return float(tangent_norm(self.kind, self.vec))


@dataclass(frozen=True)
class LambdaClass:
    """曲率下界λ及其支撑球半径R_Σ(λ)"""
    kind: SpaceformKind
    lam: float
    radius: Optional[float] = None

    def __post_init__(self):
        if not self.lam > 0:
            raise DomainError(f"λ必须为正: {self.lam}")
        inside = in_lambda_interval(self.kind, self.lam)
        if inside != (self.radius is not None):
            raise DomainError("radius 当且仅当 λ ∈ I_Σ 时定义")

    @property
    def in_interval(self) -> bool:
        return self.radius is not None

    def require_radius(self) -> float:
        if self.radius is None:
            lo, _ = lambda_interval(self.kind)
            raise DomainError(f"λ={self.lam} 不在 I_Σ=({lo}, ∞) 中, 支撑球半径无定义")
        return self.radius


# ---------------------------------------------------------------------------
# 翘曲函数与半径换算
# ---------------------------------------------------------------------------

def _check_radius_domain(kind: SpaceformKind, r: np.ndarray):
    if np.any(r < 0) or not np.all(np.isfinite(r)):
        raise DomainError("极坐标半径必须非负且有限")
    if kind is SpaceformKind.SPHERICAL and np.any(r > np.pi):
        raise DomainError("球面上极坐标半径不能超过π")


def _scalar_or_array(value: np.ndarray, like) -> ArrayLike:
    return float(value) if np.ndim(like) == 0 else value


def warp_functions(kind: SpaceformKind, r: ArrayLike) -> Tuple[ArrayLike, ArrayLike, ArrayLike]:
    """返回 (ϑ(r), ϑ'(r), Θ(r)), 其中 Θ' = ϑ

    约定: Θ_E = r²/2, Θ_S = -cos r, Θ_H = cosh r
    """
    arr = np.asarray(r, dtype=float)
    _check_radius_domain(kind, arr)
    if kind is SpaceformKind.EUCLIDEAN:
        theta, theta_prime, big_theta = arr, np.ones_like(arr), 0.5 * arr ** 2
    elif kind is SpaceformKind.SPHERICAL:
        theta, theta_prime, big_theta = np.sin(arr), np.cos(arr), -np.cos(arr)
    else:
        theta, theta_prime, big_theta = np.sinh(arr), np.cosh(arr), np.cosh(arr)
    return (_scalar_or_array(theta, r), _scalar_or_array(theta_prime, r),
            _scalar_or_array(big_theta, r))


def warp_power_integral(kind: SpaceformKind, r: ArrayLike, n: int) -> ArrayLike:
    """∫_0^r ϑ^n(s) ds 的闭式 (n ∈ {1, 2})"""
    arr = np.asarray(r, dtype=float)
    _check_radius_domain(kind, arr)
    if n == 1:
        if kind is SpaceformKind.EUCLIDEAN:
            value = 0.5 * arr ** 2
        elif kind is SpaceformKind.SPHERICAL:
            value = 2.0 * np.sin(0.5 * arr) ** 2
        else:
            value = 2.0 * np.sinh(0.5 * arr) ** 2
    elif n == 2:
        if kind is SpaceformKind.EUCLIDEAN:
            value = arr ** 3 / 3.0
        elif kind is SpaceformKind.SPHERICAL:
            value = (2.0 * arr - np.sin(2.0 * arr)) / 4.0
        else:
            value = (np.sinh(2.0 * arr) - 2.0 * arr) / 4.0
    else:
        raise DomainError(f"只支持 n ∈ {{1, 2}}, 收到 n={n}")
    return _scalar_or_array(value, r)


def lambda_interval(kind: SpaceformKind) -> Tuple[float, float]:
    """I_Σ 的端点 (开区间)"""
    if kind is SpaceformKind.HYPERBOLIC:
        return 1.0, float("inf")
    return 0.0, float("inf")


def in_lambda_interval(kind: SpaceformKind, lam: float) -> bool:
    lo, hi = lambda_interval(kind)
    return lo < lam < hi


def lambda_of_radius(kind: SpaceformKind, radius: float) -> float:
    """测地球半径 -> 主曲率 (1/R, cot R, coth R)"""
    if not radius > 0:
        raise DomainError(f"半径必须为正: {radius}")
    if kind is SpaceformKind.EUCLIDEAN:
        return 1.0 / radius
    if kind is SpaceformKind.SPHERICAL:
        if radius >= 0.5 * np.pi:
            raise DomainError("球面上正曲率的测地球半径必须小于π/2")
        return float(np.cos(radius) / np.sin(radius))
    return float(np.cosh(radius) / np.sinh(radius))


def radius_of_lambda(kind: SpaceformKind, lam: float, strict: bool = True) -> LambdaClass:
    """λ -> LambdaClass; strict=True 时 λ ∉ I_Σ 抛出 DomainError"""
    if not lam > 0:
        raise DomainError(f"λ必须为正: {lam}")
    if not in_lambda_interval(kind, lam):
        if strict:
            lo, _ = lambda_interval(kind)
            raise DomainError(f"λ={lam} 不在 I_Σ=({lo}, ∞) 中")
        return LambdaClass(kind=kind, lam=float(lam), radius=None)
    if kind is SpaceformKind.EUCLIDEAN:
        radius = 1.0 / lam
    elif kind is SpaceformKind.SPHERICAL:
        radius = float(np.arctan(1.0 / lam))
    else:
        radius = float(np.arctanh(1.0 / lam))
    return LambdaClass(kind=kind, lam=float(lam), radius=radius)


# ---------------------------------------------------------------------------
# 原点、标架与极坐标
# ---------------------------------------------------------------------------

def origin(kind: SpaceformKind, n: int) -> Point:
    coords = np.zeros(kind.model_dimension(n))
    if kind is not SpaceformKind.EUCLIDEAN:
        coords[0] = 1.0
    return Point(kind, coords)


def canonical_isometry(kind: SpaceformKind, center: np.ndarray) -> np.ndarray:
    """把原点送到center的线性等距 (S: 旋转, H: Lorentz推进); E返回单位阵"""
    c = np.asarray(center, dtype=float)
    dim = c.size
    if kind is SpaceformKind.EUCLIDEAN:
        return np.eye(dim)
    c0, cs = c[0], c[1:]
    matrix = np.empty((dim, dim))
    if kind is SpaceformKind.SPHERICAL:
        if c0 <= -1.0 + 1e-12:
            matrix = np.eye(dim)
            matrix[0, 0] = matrix[1, 1] = -1.0
            return matrix
        matrix[0, 0] = c0
        matrix[0, 1:] = -cs
        matrix[1:, 0] = cs
        matrix[1:, 1:] = np.eye(dim - 1) - np.outer(cs, cs) / (1.0 + c0)
        return matrix
    matrix[0, 0] = c0
    matrix[0, 1:] = cs
    matrix[1:, 0] = cs
    matrix[1:, 1:] = np.eye(dim - 1) + np.outer(cs, cs) / (1.0 + c0)
    return matrix


def tangent_frame(point: Point) -> np.ndarray:
    """T_cΣ 的标准正交基, 形状 (模型维数, n+1), 每列一个基向量"""
    if point.kind is SpaceformKind.EUCLIDEAN:
        return np.eye(point.coords.size)
    return canonical_isometry(point.kind, point.coords)[:, 1:]


def polar_points(kind: SpaceformKind, center: np.ndarray, frame: np.ndarray,
                 r: np.ndarray, directions: np.ndarray) -> np.ndarray:
    """测地极坐标 (r, ξ) -> 模型坐标, 即 exp_c(r·Fξ)"""
    r = np.asarray(r, dtype=float)
    ambient = np.asarray(directions, dtype=float) @ frame.T
    if kind is SpaceformKind.EUCLIDEAN:
        return center[None, :] + r[:, None] * ambient
    if kind is SpaceformKind.SPHERICAL:
        return np.cos(r)[:, None] * center[None, :] + np.sin(r)[:, None] * ambient
    return np.cosh(r)[:, None] * center[None, :] + np.sinh(r)[:, None] * ambient


def radial_vectors(kind: SpaceformKind, center: np.ndarray, frame: np.ndarray,
                   r: np.ndarray, directions: np.ndarray) -> np.ndarray:
    """径向单位向量 ∂_r 在 exp_c(r·Fξ) 处的模型坐标"""
    r = np.asarray(r, dtype=float)
    ambient = np.asarray(directions, dtype=float) @ frame.T
    if kind is SpaceformKind.EUCLIDEAN:
        return ambient.copy()
    if kind is SpaceformKind.SPHERICAL:
        return -np.sin(r)[:, None] * center[None, :] + np.cos(r)[:, None] * ambient
    return np.sinh(r)[:, None] * center[None, :] + np.cosh(r)[:, None] * ambient


def polar_coordinates(kind: SpaceformKind, center: np.ndarray, frame: np.ndarray,
                      points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """模型坐标 -> (到中心的距离, 单位方向ξ)"""
    base = np.broadcast_to(np.asarray(center, dtype=float), np.shape(points))
    vec, dist = log_rows(kind, base, points)
    if kind is SpaceformKind.HYPERBOLIC:
        coeffs = vec[:, 1:] @ frame[1:, :] - np.outer(vec[:, 0], frame[0, :])
    else:
        coeffs = vec @ frame
    norms = np.linalg.norm(coeffs, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    directions = coeffs / safe[:, None]
    directions[norms == 0] = 0.0
    directions[norms == 0, 0] = 1.0
    return dist, directions


# ---------------------------------------------------------------------------
# 指数映射、对数映射与距离
# ---------------------------------------------------------------------------

def model_distance(kind: SpaceformKind, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """逐行测地距离 (弦长公式, 小距离下精度好)"""
    diff = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    if kind is SpaceformKind.EUCLIDEAN:
        return np.linalg.norm(diff, axis=-1)
    if kind is SpaceformKind.SPHERICAL:
        chord = np.linalg.norm(diff, axis=-1)
        return 2.0 * np.arcsin(np.minimum(0.5 * chord, 1.0))
    quad = np.maximum(model_dot(kind, diff, diff), 0.0)
    return 2.0 * np.arcsinh(0.5 * np.sqrt(quad))


def exp_rows(kind: SpaceformKind, base: np.ndarray, vec: np.ndarray) -> np.ndarray:
    """批量指数映射"""
    base = np.asarray(base, dtype=float)
    vec = np.asarray(vec, dtype=float)
    if kind is SpaceformKind.EUCLIDEAN:
        return base + vec
    norm = tangent_norm(kind, vec)
    if kind is SpaceformKind.SPHERICAL:
        moved = np.cos(norm)[..., None] * base + np.sinc(norm / np.pi)[..., None] * vec
    else:
        safe = np.where(norm > 1e-8, norm, 1.0)
        ratio = np.where(norm > 1e-8, np.sinh(norm) / safe, 1.0 + norm ** 2 / 6.0)
        moved = np.cosh(norm)[..., None] * base + ratio[..., None] * vec
    return _renormalize(kind, moved)


def log_rows(kind: SpaceformKind, base: np.ndarray, target: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """批量对数映射, 返回 (切向量, 距离); 球面对径点的方向置零"""
    base = np.asarray(base, dtype=float)
    target = np.asarray(target, dtype=float)
    dist = model_distance(kind, base, target)
    if kind is SpaceformKind.EUCLIDEAN:
        return target - base, dist
    if kind is SpaceformKind.SPHERICAL:
        inner = np.sum(base * target, axis=-1)
    else:
        inner = -model_dot(kind, base, target)
    residual = target - inner[..., None] * base
    rnorm = tangent_norm(kind, residual)
    safe = np.where(rnorm > 0, rnorm, 1.0)
    vec = np.where((rnorm > 0)[..., None], residual * (dist / safe)[..., None], 0.0)
    return vec, dist


def _same_kind(p: Point, q: Point):
    if p.kind is not q.kind or p.coords.size != q.coords.size:
        raise DomainError("两个点必须属于同一空间形式且维数一致")


def exp_map(v: TangentVector) -> Point:
    """exp_base(vec); exp(0) 精确返回基点"""
    kind = v.kind
    norm = v.norm
    if kind is SpaceformKind.SPHERICAL and norm >= np.pi:
        raise DomainError("球面上切向量长度必须小于π")
    if norm == 0.0:
        return Point(kind, v.base.coords)
    moved = exp_rows(kind, v.base.coords[None, :], v.vec[None, :])[0]
    return Point(kind, moved)


def log_and_distance(p: Point, q: Point) -> Tuple[TangentVector, float]:
    """exp_p 的逆: 返回 (log_p q, d(p,q))"""
    _same_kind(p, q)
    if p.kind is SpaceformKind.SPHERICAL:
        if float(np.dot(p.coords, q.coords)) <= -1.0 + ANTIPODAL_TOL:
            raise DomainError("球面对径点之间的最短测地线不唯一")
    vec, dist = log_rows(p.kind, p.coords[None, :], q.coords[None, :])
    tangent = project_to_tangent(p.kind, p.coords, vec[0])
    return TangentVector(p, tangent), float(dist[0])


def distance(p: Point, q: Point) -> float:
    _same_kind(p, q)
    return float(model_distance(p.kind, p.coords, q.coords))


def geodesic_interpolate(p: Point, q: Point, t: float) -> Point:
    """最短测地线 γ(t) = exp_p(t·log_p q), t ∈ [0,1]"""
    if not 0.0 <= t <= 1.0:
        raise DomainError(f"插值参数必须在[0,1]内: {t}")
    v, _ = log_and_distance(p, q)
    if t == 0.0:
        return Point(p.kind, p.coords)
    if t == 1.0:
        return Point(q.kind, q.coords)
    return exp_map(TangentVector(p, t * v.vec))


# ---------------------------------------------------------------------------
# Killing场
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class KillingGenerator:
    """无穷小等距: E为平移向量, S为反对称旋转生成元, H为Minkowski反对称推进生成元"""
    kind: SpaceformKind
    translation: Optional[np.ndarray] = None
    matrix: Optional[np.ndarray] = None

    def field(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind is SpaceformKind.EUCLIDEAN:
            return np.broadcast_to(self.translation, points.shape).copy()
        return points @ self.matrix.T

    def flow(self, points: np.ndarray, t: float) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind is SpaceformKind.EUCLIDEAN:
            return points + t * self.translation[None, :]
        return points @ expm(t * self.matrix).T


def killing_generator(direction: TangentVector) -> KillingGenerator:
    """由基点b处的切向量d构造满足 X_b = d 的Killing场"""
    kind = direction.kind
    d = np.array(direction.vec, dtype=float)
    if direction.norm < 1e-14:
        raise DomainError("Killing场方向退化 (零向量)")
    if kind is SpaceformKind.EUCLIDEAN:
        return KillingGenerator(kind=kind, translation=d)
    b = np.array(direction.base.coords, dtype=float)
    if kind is SpaceformKind.SPHERICAL:
        return KillingGenerator(kind=kind, matrix=np.outer(d, b) - np.outer(b, d))
    metric = np.ones(b.size)
    metric[0] = -1.0
    # X(x) = -d<b,x>_M + b<d,x>_M
    return KillingGenerator(kind=kind, matrix=-np.outer(d, metric * b) + np.outer(b, metric * d))


def killing_field_sample(kind: SpaceformKind, p: Point, direction: TangentVector) -> TangentVector:
    """在点p处取值的Killing场 X_p"""
    if p.kind is not kind or direction.kind is not kind:
        raise DomainError("Killing场与点的空间形式不一致")
    generator = killing_generator(direction)
    value = generator.field(p.coords[None, :])[0]
    return TangentVector(p, project_to_tangent(kind, p.coords, value))


def killing_flow(kind: SpaceformKind, direction: TangentVector, points: np.ndarray, t: float) -> np.ndarray:
    if direction.kind is not kind:
        raise DomainError("Killing场与点的空间形式不一致")
    return _renormalize(kind, killing_generator(direction).flow(points, t))


# ---------------------------------------------------------------------------
# 随机等距 (不变性测试用)
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Isometry:
    kind: SpaceformKind
    linear: np.ndarray
    translation: np.ndarray

    def apply(self, points: np.ndarray) -> np.ndarray:
        moved = np.asarray(points, dtype=float) @ self.linear.T
        if self.kind is SpaceformKind.EUCLIDEAN:
            moved = moved + self.translation
        return _renormalize(self.kind, moved)

    def apply_vectors(self, vectors: np.ndarray) -> np.ndarray:
        return np.asarray(vectors, dtype=float) @ self.linear.T


def _random_orthogonal(size: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(size, size)))
    return q * np.sign(np.diag(r))[None, :]


def random_isometry(kind: SpaceformKind, n: int, rng: np.random.Generator) -> Isometry:
    dim = kind.model_dimension(n)
    if kind is SpaceformKind.EUCLIDEAN:
        return Isometry(kind, _random_orthogonal(dim, rng), rng.normal(size=dim))
    if kind is SpaceformKind.SPHERICAL:
        return Isometry(kind, _random_orthogonal(dim, rng), np.zeros(dim))
    rotation = np.eye(dim)
    rotation[1:, 1:] = _random_orthogonal(dim - 1, rng)
    spatial = 0.7 * rng.normal(size=dim - 1)
    target = np.concatenate([[np.sqrt(1.0 + spatial @ spatial)], spatial])
    return Isometry(kind, canonical_isometry(kind, target) @ rotation, np.zeros(dim))
