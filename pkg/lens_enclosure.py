"""
透镜与包围球 - 由两个不同支撑球构造λ-透镜, 以测地中点为心的包围球,
β-剖面检查和包围半径的暴力验证
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from curvature_analysis import CurvatureReport, shape_operator, strict_point, supporting_centers
from geometry_errors import (
    ContainmentViolation, DegenerateLens, DomainError, MarginViolation, NoStrictPoint, TrivialBody,
)
from radial_body import RadialBody
from sphere_grid import SphereGrid
from spaceform_geometry import (
    LambdaClass, Point, SpaceformKind, TangentVector, exp_map, exp_rows, geodesic_interpolate,
    log_and_distance, model_distance, model_dot, origin, polar_points, radius_of_lambda,
    tangent_frame, warp_functions,
)

logger = logging.getLogger(__name__)

BISECTION_STEPS = 64
CENTER_CHUNK = 128
GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))


@dataclass(frozen=True, eq=False)
class LensSpec:
    """两个半径为 R_Σ(λ) 的闭球之交"""
    kind: SpaceformKind
    lambda_class: LambdaClass
    p: Point
    q: Point

    def __post_init__(self):
        radius = self.lambda_class.require_radius()
        if self.p.kind is not self.kind or self.q.kind is not self.kind:
            raise DomainError("透镜中心的空间形式不一致")
        d = float(model_distance(self.kind, self.p.coords, self.q.coords))
        if d <= 1e-12:
            raise DegenerateLens("两个支撑球中心重合")
        if d >= 2.0 * radius:
            raise DomainError(f"中心距离 d={d:.6g} 必须小于 2R={2 * radius:.6g}")

    @property
    def radius(self) -> float:
        return self.lambda_class.radius

    @property
    def d(self) -> float:
        return float(model_distance(self.kind, self.p.coords, self.q.coords))

    @property
    def n(self) -> int:
        return self.p.n

    def midpoint(self) -> Point:
        return geodesic_interpolate(self.p, self.q, 0.5)

    def rim_cosine(self) -> float:
        """支撑球面上透镜边缘相对于中心连线的夹角余弦"""
        R, d = self.radius, self.d
        if self.kind is SpaceformKind.EUCLIDEAN:
            return d / (2.0 * R)
        if self.kind is SpaceformKind.SPHERICAL:
            return float(np.tan(0.5 * d) / np.tan(R))
        return float(np.tanh(0.5 * d) / np.tanh(R))

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind.label, "lambda": self.lambda_class.lam, "radius": self.radius,
                "p": self.p.coords.tolist(), "q": self.q.coords.tolist(), "d": self.d}


def make_lens(kind: SpaceformKind, lam: float, d: float, n: int) -> LensSpec:
    """关于原点对称的透镜, 中心沿第一个坐标轴各偏移 d/2"""
    lam_class = radius_of_lambda(kind, lam)
    base = origin(kind, n)
    axis = tangent_frame(base)[:, 0]
    p = exp_map(TangentVector(base, -0.5 * d * axis))
    q = exp_map(TangentVector(base, 0.5 * d * axis))
    return LensSpec(kind, lam_class, p, q)


def lens_contains(lens: LensSpec, points: np.ndarray, slack: float = 0.0) -> np.ndarray:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    limit = lens.radius + slack
    return ((model_distance(lens.kind, points, lens.p.coords[None, :]) <= limit)
            & (model_distance(lens.kind, points, lens.q.coords[None, :]) <= limit))


def _cap_frame(lens: LensSpec, near: Point, far: Point) -> np.ndarray:
    """near 处的标准正交切标架, 第一列指向 far"""
    toward, _ = log_and_distance(near, far)
    axis = toward.vec / toward.norm
    frame = tangent_frame(near)
    metric = np.ones(frame.shape[0])
    if lens.kind is SpaceformKind.HYPERBOLIC:
        metric[0] = -1.0
    columns = [axis]
    for column in frame.T:
        vec = column.copy()
        for basis in columns:
            vec -= np.sum(metric * vec * basis) * basis
        norm = np.sqrt(max(np.sum(metric * vec * vec), 0.0))
        if norm > 1e-8:
            columns.append(vec / norm)
        if len(columns) == frame.shape[1]:
            break
    return np.column_stack(columns)


def _cap_points(lens: LensSpec, near: Point, far: Point, count: int) -> np.ndarray:
    rim = float(np.arccos(np.clip(lens.rim_cosine(), -1.0, 1.0)))
    frame = _cap_frame(lens, near, far)
    if lens.n == 1:
        angles = np.linspace(-rim, rim, count)
        directions = np.column_stack([np.cos(angles), np.sin(angles)])
    else:
        ring = max(8, int(np.sqrt(count)))
        interior = max(count - ring - 1, 1)
        k = np.arange(interior) + 0.5
        cos_polar = 1.0 - k / interior * (1.0 - np.cos(rim))
        azimuth = GOLDEN_ANGLE * k
        sin_polar = np.sqrt(np.maximum(1.0 - cos_polar ** 2, 0.0))
        ring_az = 2.0 * np.pi * np.arange(ring) / ring
        directions = np.vstack([
            [[1.0, 0.0, 0.0]],
            np.column_stack([cos_polar, sin_polar * np.cos(azimuth), sin_polar * np.sin(azimuth)]),
            np.column_stack([np.full(ring, np.cos(rim)), np.sin(rim) * np.cos(ring_az),
                             np.sin(rim) * np.sin(ring_az)]),
        ])
    radii = np.full(directions.shape[0], lens.radius)
    return polar_points(lens.kind, near.coords, frame, radii, directions)


def default_boundary_samples(n: int) -> int:
    return 4096 if n == 1 else 16384


def sample_lens_boundary(lens: LensSpec, count: Optional[int] = None) -> np.ndarray:
    """两个球冠上的稠密边界采样 (含边缘与顶点)"""
    count = default_boundary_samples(lens.n) if count is None else count
    half = max(count // 2, 4)
    return np.vstack([_cap_points(lens, lens.p, lens.q, half),
                      _cap_points(lens, lens.q, lens.p, half)])


@dataclass(frozen=True, eq=False)
class EnclosureResult:
    c: Point
    rho: float
    margin: float
    lens: Optional[LensSpec] = None

    def to_dict(self) -> Dict[str, Any]:
        return {"c": self.c.coords.tolist(), "rho": self.rho, "margin": self.margin}


def enclosing_ball(lens: LensSpec, samples: Optional[int] = None) -> EnclosureResult:
    """以测地中点为心包住透镜的球; margin = R_Σ(λ) - ρ 必须为正"""
    c = lens.midpoint()
    boundary = sample_lens_boundary(lens, samples)
    rho = float(np.max(model_distance(lens.kind, boundary, c.coords[None, :])))
    margin = lens.radius - rho
    if not margin > 0:
        raise MarginViolation(f"包围半径 ρ={rho:.12g} 不小于 R_Σ(λ)={lens.radius:.12g}")
    return EnclosureResult(c=c, rho=rho, margin=margin, lens=lens)


def circumradius_bruteforce(lens: LensSpec, resolution: int = 201,
                            samples: Optional[int] = None) -> float:
    """在 p-q 测地线上搜索中心, 取最大距离的最小值"""
    boundary = sample_lens_boundary(lens, samples)
    v, _ = log_and_distance(lens.p, lens.q)
    ts = np.linspace(0.0, 1.0, resolution)
    candidates = exp_rows(lens.kind, np.broadcast_to(lens.p.coords, (resolution, lens.p.coords.size)),
                          ts[:, None] * v.vec[None, :])
    best = np.inf
    for center in candidates:
        best = min(best, float(np.max(model_distance(lens.kind, boundary, center[None, :]))))
    return best


# ---------------------------------------------------------------------------
# β-剖面
# ---------------------------------------------------------------------------

@dataclass
class BetaProfileReport:
    profile: pd.DataFrame
    passed: bool
    convex: Optional[bool] = None
    fit_residual: Optional[float] = None
    max_beta: float = float("nan")
    bound: float = float("nan")


def beta_profile_check(lens: LensSpec, z: Point, samples: int = 65, tol: float = 1e-10) -> BetaProfileReport:
    """β(t) = Θ(d(z, γ(t))) 沿 p→q 测地线的凸性 (E/H) 或正弦拟合 (S)"""
    if not lens_contains(lens, z.coords[None, :], slack=1e-12)[0]:
        raise DomainError("z 不在透镜内")
    v, d = log_and_distance(lens.p, lens.q)
    ts = np.linspace(0.0, 1.0, samples)
    path = exp_rows(lens.kind, np.broadcast_to(lens.p.coords, (samples, lens.p.coords.size)),
                    ts[:, None] * v.vec[None, :])
    r = model_distance(lens.kind, path, z.coords[None, :])
    _, _, beta = warp_functions(lens.kind, r)
    profile = pd.DataFrame({"t": ts, "beta": beta})
    scale = max(1.0, float(np.max(np.abs(beta))))

    if lens.kind is SpaceformKind.SPHERICAL:
        tau = ts * d
        design = np.column_stack([np.cos(tau), np.sin(tau)])
        coeffs, *_ = np.linalg.lstsq(design, beta, rcond=None)
        residual = float(np.max(np.abs(design @ coeffs - beta)))
        _, _, bound = warp_functions(lens.kind, lens.radius)
        passed = residual <= tol * scale and np.all(beta < bound + tol * scale)
        return BetaProfileReport(profile, bool(passed), fit_residual=residual,
                                 max_beta=float(np.max(beta)), bound=float(bound))

    second = beta[2:] - 2.0 * beta[1:-1] + beta[:-2]
    convex = bool(np.all(second >= -tol * scale))
    bound = max(beta[0], beta[-1])
    passed = convex and bool(np.all(beta <= bound + tol * scale))
    return BetaProfileReport(profile, passed, convex=convex, max_beta=float(np.max(beta)),
                             bound=float(bound))


def random_lens_point(lens: LensSpec, rng: np.random.Generator, max_tries: int = 10000) -> Point:
    """透镜内的随机点 (包围球内拒绝采样)"""
    c = lens.midpoint()
    frame = tangent_frame(c)
    reach = lens.radius
    dim = frame.shape[1]
    for _ in range(max_tries):
        direction = rng.normal(size=dim)
        direction /= np.linalg.norm(direction)
        radius = reach * rng.random() ** (1.0 / dim)
        point = polar_points(lens.kind, c.coords, frame, np.array([radius]), direction[None, :])[0]
        if lens_contains(lens, point[None, :])[0]:
            return Point(lens.kind, point)
    raise DomainError("拒绝采样未能在透镜内取到点")


# ---------------------------------------------------------------------------
# 透镜凸体与支撑球对
# ---------------------------------------------------------------------------

def make_lens_body(lens: LensSpec, grid: SphereGrid) -> RadialBody:
    """以测地中点为心的透镜径向图; 边界所属的支撑球变化处标记为非光滑"""
    if grid.n != lens.n:
        raise DomainError("网格维数与透镜维数不一致")
    c = lens.midpoint()
    frame = tangent_frame(c)
    count = len(grid)
    lo = np.zeros(count)
    hi = np.full(count, lens.radius + 0.5 * lens.d)
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        inside = lens_contains(lens, polar_points(lens.kind, c.coords, frame, mid, grid.nodes))
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
    rho = lo
    boundary = polar_points(lens.kind, c.coords, frame, rho, grid.nodes)
    to_p = model_distance(lens.kind, boundary, lens.p.coords[None, :])
    to_q = model_distance(lens.kind, boundary, lens.q.coords[None, :])
    binding = to_p >= to_q
    rows, cols = grid.adjacency.nonzero()
    switch = np.zeros(count, dtype=bool)
    changed = binding[rows] != binding[cols]
    switch[rows[changed]] = True
    switch[cols[changed]] = True
    return RadialBody(lens.kind, c, grid, rho, ~switch, frame)


def lens_from_supports(body: RadialBody, lam: float, report: Optional[CurvatureReport] = None,
                       containment_tol: Optional[float] = None) -> LensSpec:
    """支撑球中心中距离最远的一对构成的透镜, 并逐点验证包含"""
    report = report or shape_operator(body)
    lam_class = radius_of_lambda(body.kind, lam)
    centers = supporting_centers(body, lam, report)[body.smoothness_flags]
    best, pair = -1.0, (0, 0)
    for start in range(0, centers.shape[0], CENTER_CHUNK):
        block = centers[start:start + CENTER_CHUNK]
        dist = model_distance(body.kind, block[:, None, :], centers[None, :, :])
        i, j = np.unravel_index(int(np.argmax(dist)), dist.shape)
        if dist[i, j] > best:
            best, pair = float(dist[i, j]), (start + int(i), int(j))
    if best <= 1e-10:
        raise TrivialBody("所有支撑球重合, 凸体是半径 R_Σ(λ) 的测地球")
    p = Point(body.kind, centers[pair[0]])
    q = Point(body.kind, centers[pair[1]])
    lens = LensSpec(body.kind, lam_class, p, q)
    if containment_tol is None:
        containment_tol = 1e-8 if body.n == 1 else 1e-4
    inside = lens_contains(lens, report.boundary_points, slack=containment_tol)
    if not np.all(inside):
        raise ContainmentViolation(f"{int(np.sum(~inside))} 个边界节点不在透镜内")
    logger.debug("lens from supports: d=%.6g", lens.d)
    return lens


@dataclass
class EnclosureChainReport:
    """支撑球透镜 -> 包围球 -> 严格点 的完整链条"""
    lens: Optional[LensSpec] = None
    enclosure: Optional[EnclosureResult] = None
    strict_node: Optional[int] = None
    mode: str = "lens"
    notes: List[str] = field(default_factory=list)

    @property
    def succeeded(self) -> bool:
        if self.mode == "strict-only":
            return self.strict_node is not None
        return None not in (self.lens, self.enclosure, self.strict_node)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mode": self.mode,
            "lens": None if self.lens is None else self.lens.to_dict(),
            "enclosure": None if self.enclosure is None else self.enclosure.to_dict(),
            "strict_node": self.strict_node,
            "notes": list(self.notes),
        }


def run_enclosure_chain(body: RadialBody, lam: float, tol: Optional[float] = None,
                        report: Optional[CurvatureReport] = None) -> EnclosureChainReport:
    report = report or shape_operator(body)
    chain = EnclosureChainReport()
    if not radius_of_lambda(body.kind, lam, strict=False).in_interval:
        chain.mode = "strict-only"
        chain.notes.append("λ ∉ I_Σ: 没有支撑半径, 只寻找严格点")
    else:
        chain.lens = lens_from_supports(body, lam, report)
        chain.enclosure = enclosing_ball(chain.lens)
    try:
        chain.strict_node = strict_point(body, lam, tol, report)
    except NoStrictPoint as e:
        chain.notes.append(f"NoStrictPoint: {e}")
    return chain
