"""
保体积增面积扰动 - 法向变形、两峰变分场、体积约束求解、扰动轨迹与面积最大化

ψ(p, t, s) = exp_p((t·F(p) + s·G(p))·ν̂_p), 其中 s = b(t) 由体积约束确定
Case 1: Ω 上平均曲率非常数, F 放在 H 较小处, G 放在 H 较大处
Case 2: Ω 上平均曲率为常数, ν̂ = ν, F 均值为零, 面积在二阶上增加
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import brentq, minimize, root_scalar

from curvature_analysis import (
    CurvatureReport, lambda_convexity_check, neighborhood_radius, shape_operator, strict_point,
)
from experiment_config import PerturbationConfig, ToleranceConfig
from geometry_errors import (
    ConvexityExit, DomainError, GraphFailure, NoBracket, NoStrictPoint, NumericalDegeneracy, TrivialBody,
)
from radial_body import RadialBody, measure, measure_volume, polygon_perimeter
from sphere_grid import sphere_log
from spaceform_geometry import (
    SpaceformKind, exp_rows, model_distance, model_dot, polar_coordinates, polar_points,
    project_to_tangent, tangent_norm, warp_functions, warp_power_integral,
)
from variation_formulas import (
    VariationField, first_variations, second_variations, stability_potential, stiffness_matrix,
)

logger = logging.getLogger(__name__)

H_CONSTANCY_THRESHOLD = 1e-6
AREA_GAIN_FACTOR = 1e-12
NEWTON_ITERATIONS = 30
RAY_ITERATIONS = 64
CASE2_OFFSET = 2.5
CANDIDATE_SCAN = 400
SENSITIVITY_STEP = 1e-6
RATE_FLOOR = 1e-3
ORDER_TARGET = 2.0
ORDER_ROUNDING = 0.15
FD_FLOOR = 1e-8
POLISH_PASSES = 2
POLISH_VOLUME_TOL = 1e-9


# ---------------------------------------------------------------------------
# 法向变形与重投影
# ---------------------------------------------------------------------------

def _trig_weights(coeffs: np.ndarray, count: int, derivative: bool) -> np.ndarray:
    weights = np.full(coeffs.size, 2.0)
    weights[0] = 1.0
    if count % 2 == 0:
        weights[-1] = 0.0 if derivative else 1.0
    return weights


def _trig_eval(coeffs: np.ndarray, count: int, x: np.ndarray, derivative: bool = False) -> np.ndarray:
    """rfft 系数 (已除以 N) 的三角插值在任意相位 x 处的值或导数"""
    k = np.arange(coeffs.size)
    terms = coeffs[None, :] * np.exp(1j * np.outer(x, k)) * _trig_weights(coeffs, count, derivative)[None, :]
    if derivative:
        terms = terms * (1j * k)[None, :]
    return np.real(np.sum(terms, axis=1))


def _trig_value_and_slope(coeffs: np.ndarray, count: int, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    k = np.arange(coeffs.size)
    terms = coeffs[None, :] * np.exp(1j * np.outer(x, k))
    value = np.real(terms @ _trig_weights(coeffs, count, False))
    slope = np.real(terms @ (_trig_weights(coeffs, count, True) * 1j * k))
    return value, slope


def _reproject_curve(body: RadialBody, moved: np.ndarray) -> np.ndarray:
    """沿每条网格射线求变形曲线的交点: x + φ(x) 单调, 在括号区间内二分 (牛顿步加速)"""
    grid = body.grid
    count = len(grid)
    order = grid.angular_order
    theta = grid.angles[order]
    radius, directions = polar_coordinates(body.kind, body.center.coords, body.frame, moved)
    theta_new = np.arctan2(directions[:, 1], directions[:, 0])
    shift = np.angle(np.exp(1j * (theta_new - grid.angles)))[order]
    phi = np.fft.rfft(shift) / count
    rad = np.fft.rfft(radius[order]) / count

    samples = np.linspace(0.0, 2.0 * np.pi, 4 * count, endpoint=False)
    if np.min(1.0 + _trig_eval(phi, count, samples, derivative=True)) <= 0:
        raise GraphFailure("变形后的曲线不再是关于中心的径向图")

    target = theta - theta[0]
    reach = 2.0 * float(np.max(np.abs(_trig_eval(phi, count, samples)))) + 1e-12
    lo, hi = target - reach, target + reach
    if (np.any(lo + _trig_eval(phi, count, lo) > target)
            or np.any(hi + _trig_eval(phi, count, hi) < target)):
        raise GraphFailure("射线二分的初始区间不包含交点")
    x = target.copy()
    for _ in range(RAY_ITERATIONS):
        value, slope = _trig_value_and_slope(phi, count, x)
        residual = x + value - target
        if np.max(np.abs(residual)) < 1e-15:
            break
        lo = np.where(residual < 0, x, lo)
        hi = np.where(residual > 0, x, hi)
        newton = x - residual / (1.0 + slope)
        inside = (newton > lo) & (newton < hi)
        x = np.where(inside, newton, 0.5 * (lo + hi))
    else:
        logger.debug("ray bisection stopped at residual %.3e", np.max(np.abs(residual)))
    rho = np.empty(count)
    rho[order] = _trig_eval(rad, count, x)
    return rho


def _design_with_gradient(y: np.ndarray):
    y1, y2 = y[..., 0], y[..., 1]
    zero, one = np.zeros_like(y1), np.ones_like(y1)
    basis = np.stack([one, y1, y2, 0.5 * y1 ** 2, y1 * y2, 0.5 * y2 ** 2,
                      y1 ** 3, y1 ** 2 * y2, y1 * y2 ** 2, y2 ** 3], axis=-1)
    d1 = np.stack([zero, one, zero, y1, y2, zero, 3 * y1 ** 2, 2 * y1 * y2, y2 ** 2, zero], axis=-1)
    d2 = np.stack([zero, zero, one, zero, y1, y2, zero, y1 ** 2, 2 * y1 * y2, 3 * y2 ** 2], axis=-1)
    return basis, d1, d2


def _reproject_surface(body: RadialBody, moved: np.ndarray, moved_mask: np.ndarray) -> np.ndarray:
    """n=2: 在节点的二环指数坐标中拟合角向位移和径向位移, 求射线方向的原像

    ρ 本身用常数项固定为节点值的三次拟合, 位移为零时结果精确等于原值
    """
    grid = body.grid
    radius, directions = polar_coordinates(body.kind, body.center.coords, body.frame, moved)
    table, mask = grid.two_ring
    safe = np.where(mask, table, 0)
    rho = np.array(body.rho, dtype=float)
    nodes = np.flatnonzero(moved_mask)
    if nodes.size == 0:
        return rho

    h = grid.spacing
    stencil = np.concatenate([nodes[:, None], safe[nodes]], axis=1)
    valid = np.concatenate([np.ones((nodes.size, 1), dtype=bool), mask[nodes]], axis=1)
    base = grid.nodes[nodes][:, None, :]
    frames = grid.frames[nodes][:, None, :, :]
    y = sphere_log(base, frames, grid.nodes[stencil]) / h
    drift = (sphere_log(base, frames, directions[stencil]) / h - y) * valid[..., None]
    lift = (radius[stencil] - body.rho[stencil]) * valid
    relief = (body.rho[stencil] - body.rho[nodes][:, None]) * valid

    design, _, _ = _design_with_gradient(y)
    design = design * valid[..., None]
    pinv = np.linalg.pinv(design)
    coeff_drift = np.einsum("nij,njk->nik", pinv, drift)
    coeff_lift = np.einsum("nij,nj->ni", pinv, lift)
    coeff_relief = np.einsum("nij,nj->ni", np.linalg.pinv(design[..., 1:]), relief)

    point = -coeff_drift[:, 0, :]
    identity = np.eye(2)[None, :, :]
    for _ in range(NEWTON_ITERATIONS):
        basis, d1, d2 = _design_with_gradient(point)
        value = point + np.einsum("ni,nik->nk", basis, coeff_drift)
        jac = identity + np.stack([np.einsum("ni,nik->nk", d1, coeff_drift),
                                   np.einsum("ni,nik->nk", d2, coeff_drift)], axis=-1)
        det = np.linalg.det(jac)
        if np.any(det <= 0):
            raise GraphFailure("变形后的曲面在重投影时失去单射性")
        step = np.linalg.solve(jac, value[..., None])[..., 0]
        point = point - step
        if np.max(np.abs(step)) < 1e-14:
            break
    if np.any(np.linalg.norm(point, axis=1) > 3.0):
        raise GraphFailure("重投影的牛顿迭代离开了局部邻域")
    basis, _, _ = _design_with_gradient(point)
    rho[nodes] = (body.rho[nodes] + np.einsum("ni,ni->n", basis[:, 1:], coeff_relief)
                  + np.einsum("ni,ni->n", basis, coeff_lift))
    return rho


def deform(body: RadialBody, vf: VariationField, t: float,
           direction_field: Optional[np.ndarray] = None,
           report: Optional[CurvatureReport] = None) -> RadialBody:
    """p ↦ exp_p((t·v + t²a/2)·ν̂_p), 再重投影为关于中心的径向函数"""
    shift = t * vf.v + 0.5 * t * t * vf.a
    if t == 0.0 or not np.any(shift):
        return body
    if direction_field is None:
        report = report or shape_operator(body)
        direction_field = report.normals
    points = body.boundary_points
    moved_mask = shift != 0
    moved = points.copy()
    moved[moved_mask] = exp_rows(body.kind, points[moved_mask],
                                 shift[moved_mask][:, None] * direction_field[moved_mask])
    if body.n == 1:
        rho = _reproject_curve(body, moved)
    else:
        rho = _reproject_surface(body, moved, moved_mask)
    # 未移动的节点仍在变形后的曲面上, 径向值保持不变
    rho[~moved_mask] = body.rho[~moved_mask]
    try:
        return body.with_rho(rho)
    except DomainError as e:
        raise GraphFailure(f"变形后的径向函数无效: {e}") from e


# ---------------------------------------------------------------------------
# 两峰变分场
# ---------------------------------------------------------------------------

def bump_profile(dist: np.ndarray, radius: float) -> np.ndarray:
    """C∞ 紧支鼓包 exp(1 - 1/(1 - (s/r)²)), 峰值 1"""
    s = np.asarray(dist, dtype=float) / radius
    out = np.zeros_like(s)
    inside = s < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
    return out


@dataclass(frozen=True, eq=False)
class BumpPair:
    """F 支在 Ω₁, G 支在 Ω₂, ν̂ 为参考方向场"""
    omega1: np.ndarray
    omega2: np.ndarray
    F: np.ndarray
    G: np.ndarray
    nu_hat: np.ndarray
    case: int
    centers: Tuple[int, ...] = ()
    bump_radius: float = 0.0

    def __post_init__(self):
        if self.case not in (1, 2):
            raise DomainError(f"未知的情形: {self.case}")
        if np.any(self.omega1 & self.omega2):
            raise DomainError("Ω₁ 与 Ω₂ 必须不相交")
        if np.any(self.F[~self.omega1] != 0) or np.any(self.G[~self.omega2] != 0):
            raise DomainError("F, G 必须分别支在 Ω₁, Ω₂ 内")
        if np.any(self.G < 0):
            raise DomainError("G 必须非负")
        if self.case == 1 and np.any(self.F < 0):
            raise DomainError("Case 1 中 F 必须非负")
        if not np.any(self.F):
            raise DomainError("F 不能恒为零")

    @property
    def omega(self) -> np.ndarray:
        return self.omega1 | self.omega2

    def alignment(self, report: CurvatureReport) -> np.ndarray:
        return model_dot(report.kind, self.nu_hat, report.normals)

    def normalizations(self, report: CurvatureReport) -> Tuple[float, float]:
        """(∫F⟨ν̂,ν⟩, ∫G⟨ν̂,ν⟩)"""
        weight = report.area_weights * self.alignment(report)
        return float(np.sum(weight * self.F)), float(np.sum(weight * self.G))

    def scaled(self, factor: float) -> "BumpPair":
        return BumpPair(self.omega1, self.omega2, factor * self.F, factor * self.G,
                        self.nu_hat, self.case, self.centers, self.bump_radius)


def extended_direction(body: RadialBody, report: CurvatureReport, node: int) -> np.ndarray:
    """ν_{p₀} 在模型坐标中的常值延拓, 投影到各点切空间后单位化"""
    pts = report.boundary_points
    field_ = project_to_tangent(body.kind, pts, np.broadcast_to(report.normals[node], pts.shape))
    norm = tangent_norm(body.kind, field_)
    return field_ / np.where(norm > 0, norm, 1.0)[:, None]


def strict_region(body: RadialBody, lam: float, node: int, report: CurvatureReport,
                  nu_hat: np.ndarray, config: PerturbationConfig, tol: float) -> np.ndarray:
    """严格点附近 κ₁ > λ + tol 且 ⟨ν̂,ν⟩ 足够大的光滑节点"""
    pts = report.boundary_points
    near = model_distance(body.kind, pts, pts[node][None, :]) <= config.patch_radius
    align = model_dot(body.kind, nu_hat, report.normals)
    return (near & (report.kappa_min > lam + tol) & (align > config.normal_floor)
            & body.smoothness_flags)


def roomy_nodes(report: CurvatureReport, lam: float, omega: np.ndarray, fraction: float) -> np.ndarray:
    """Ω 中余量 κ₁ - λ 不低于 Ω 内最大余量 fraction 倍的节点, 作为鼓包中心的候选"""
    omega = np.asarray(omega, dtype=bool)
    if not np.any(omega):
        return omega.copy()
    margin = report.kappa_min - lam
    return omega & (margin >= fraction * float(np.max(margin[omega])))


def classify_case(body: RadialBody, omega: np.ndarray,
                  report: Optional[CurvatureReport] = None) -> int:
    """H 在 Ω 上的相对振幅 < 1e-6 时为 Case 2, 否则 Case 1"""
    report = report or shape_operator(body)
    values = report.mean[np.asarray(omega, dtype=bool)]
    if values.size == 0:
        raise DomainError("Ω 为空")
    mean = abs(float(np.mean(values)))
    spread = float(np.max(values) - np.min(values))
    return 2 if spread < H_CONSTANCY_THRESHOLD * max(mean, 1e-300) else 1


def _support_inside(dist: np.ndarray, radius: float, omega: np.ndarray) -> bool:
    return bool(np.all(omega[dist < radius]))


class _DistanceCache:
    def __init__(self, kind: SpaceformKind, points: np.ndarray):
        self.kind = kind
        self.points = points
        self.rows: Dict[int, np.ndarray] = {}

    def __call__(self, node: int) -> np.ndarray:
        if node not in self.rows:
            self.rows[node] = model_distance(self.kind, self.points, self.points[node][None, :])
        return self.rows[node]


def _case1_bumps(body: RadialBody, report: CurvatureReport, omega: np.ndarray, centers: np.ndarray,
                 nu_hat: np.ndarray, radius: float, spacing: float, rank: int = 0) -> Optional[BumpPair]:
    """F 放在候选中心里 H 最小处, G 放在 H 最大处; rank 跳过前面的可行组合"""
    H = report.mean
    dist_to = _DistanceCache(body.kind, report.boundary_points)
    candidates = np.flatnonzero(centers)
    for _ in range(6):
        skipped = 0
        ranked_high = candidates[np.argsort(-H[candidates], kind="stable")][:CANDIDATE_SCAN]
        for high in (int(c) for c in ranked_high):
            if not _support_inside(dist_to(high), radius, omega):
                continue
            far = candidates[dist_to(high)[candidates] >= 2.0 * radius + 2.0 * spacing]
            ranked_low = far[np.argsort(H[far], kind="stable")][:CANDIDATE_SCAN]
            low = next((int(c) for c in ranked_low if _support_inside(dist_to(int(c)), radius, omega)), None)
            if low is None:
                continue
            phi_low = bump_profile(dist_to(low), radius)
            phi_high = bump_profile(dist_to(high), radius)
            omega1, omega2 = phi_low > 0, phi_high > 0
            if np.max(H[omega1]) >= np.min(H[omega2]):
                continue
            if skipped < rank:
                skipped += 1
                continue
            weight = report.area_weights * model_dot(body.kind, nu_hat, report.normals)
            F = phi_low / np.sum(weight * phi_low)
            G = phi_high / np.sum(weight * phi_high)
            return BumpPair(omega1, omega2, F, G, nu_hat, 1, (low, high), radius)
        radius *= 0.5
    return None


def _case2_bumps(body: RadialBody, report: CurvatureReport, omega: np.ndarray, centers: np.ndarray,
                 node: int, radius: float, spacing: float, rank: int = 0) -> BumpPair:
    """G 放在严格点, F 为环上两个鼓包之差 (面积加权均值为零)"""
    m = report.area_weights
    dist_to = _DistanceCache(body.kind, report.boundary_points)
    for _ in range(6):
        d0 = dist_to(node)
        offset = CASE2_OFFSET * radius
        ring = np.flatnonzero(centers & (np.abs(d0 - offset) <= max(spacing, 0.1 * radius)))
        if ring.size >= 2 and _support_inside(d0, radius, omega):
            ring = ring[np.argsort(np.abs(d0[ring] - offset), kind="stable")]
            skipped = 0
            for a in (int(c) for c in ring):
                da = dist_to(a)
                b = int(ring[np.argmax(da[ring])])
                db = dist_to(b)
                if not (da[b] >= 2.0 * radius and _support_inside(da, radius, omega)
                        and _support_inside(db, radius, omega)):
                    continue
                if skipped < rank:
                    skipped += 1
                    continue
                phi_a, phi_b = bump_profile(da, radius), bump_profile(db, radius)
                phi_g = bump_profile(d0, radius)
                F = phi_a - (np.sum(m * phi_a) / np.sum(m * phi_b)) * phi_b
                F /= np.max(np.abs(F))
                if -np.sum(m * report.mean * F) < 0:
                    F = -F
                G = phi_g / np.sum(m * phi_g)
                omega1 = (phi_a > 0) | (phi_b > 0)
                return BumpPair(omega1, phi_g > 0, F, G, report.normals.copy(), 2, (a, b, node), radius)
        radius *= 0.5
    raise DomainError("无法在严格区域内放置 Case 2 的鼓包")


def build_bumps(body: RadialBody, lam: float, mode: str = "auto",
                config: Optional[PerturbationConfig] = None, tol: Optional[float] = None,
                report: Optional[CurvatureReport] = None, rank: int = 0) -> BumpPair:
    """在严格点附近构造两峰变分场; 无严格点时抛出 TrivialBody

    rank > 0 时返回排在后面的候选组合, 前一组合走不动时换用
    """
    config = config or PerturbationConfig()
    report = report or shape_operator(body)
    tol = ToleranceConfig().curvature_for(body.n) if tol is None else tol
    try:
        node = strict_point(body, lam, tol, report)
    except NoStrictPoint as e:
        raise TrivialBody(str(e)) from e
    spacing = neighborhood_radius(body, report) / 5.0

    if mode in ("auto", "case1"):
        nu_hat = extended_direction(body, report, node)
        omega = strict_region(body, lam, node, report, nu_hat, config, tol)
        case = 1 if mode == "case1" else classify_case(body, omega, report)
        if case == 1:
            centers = roomy_nodes(report, lam, omega, config.margin_fraction)
            bumps = _case1_bumps(body, report, omega, centers, nu_hat, config.bump_radius, spacing, rank)
            if bumps is not None:
                logger.debug("Case 1 bumps at nodes %s (r=%.3g)", bumps.centers, bumps.bump_radius)
                return bumps
            logger.warning("Case 1 selection failed (no separated H levels); falling back to Case 2")

    omega = strict_region(body, lam, node, report, report.normals, config, tol)
    centers = roomy_nodes(report, lam, omega, config.margin_fraction)
    return _case2_bumps(body, report, omega, centers, node, config.bump_radius, spacing, rank)


def psi(body: RadialBody, bumps: BumpPair, t: float, s: float) -> RadialBody:
    """两参数变形 ψ(·, t, s)"""
    speeds = t * bumps.F + s * bumps.G
    if not np.any(speeds):
        return body
    return deform(body, VariationField.from_values(speeds), 1.0, bumps.nu_hat)


def step_budget(body: RadialBody, lam: float, bumps: BumpPair, tol: float, margin_use: float,
                report: Optional[CurvatureReport] = None) -> float:
    """沿 (F, b'(0)·G) 方向的步长上限: 按线性化的 κ₁ 下降率, 每个节点至多用掉 margin_use 的余量"""
    report = report or shape_operator(body)
    f_int, g_int = bumps.normalizations(report)
    slope = -f_int / g_int if g_int > 0 else 0.0
    try:
        nudged = psi(body, bumps, SENSITIVITY_STEP, SENSITIVITY_STEP * slope)
        kappa = shape_operator(nudged).kappa_min
    except (GraphFailure, DomainError, NumericalDegeneracy) as e:
        logger.debug("curvature sensitivity unavailable: %s", e)
        return float("inf")
    rate = (report.kappa_min - kappa) / SENSITIVITY_STEP
    falling = body.smoothness_flags & (rate > 0)
    if not np.any(falling):
        return float("inf")
    falling &= rate >= RATE_FLOOR * float(np.max(rate[falling]))
    room = np.maximum(report.kappa_min - lam + tol, 0.0)
    return float(margin_use * np.min(room[falling] / rate[falling]))


# ---------------------------------------------------------------------------
# 体积约束
# ---------------------------------------------------------------------------

def solve_volume_constraint(body: RadialBody, bumps: BumpPair, t: float, tol: float = 1e-12,
                            target_volume: Optional[float] = None,
                            report: Optional[CurvatureReport] = None) -> float:
    """求 b 使 vol(ψ(·, t, b)) = 目标体积; 割线法, 失败时扩张区间用 brentq"""
    report = report or shape_operator(body)
    target = measure_volume(body) if target_volume is None else float(target_volume)
    f_int, g_int = bumps.normalizations(report)
    if not g_int > 0:
        raise DomainError("∫G⟨ν̂,ν⟩ 必须为正")
    s0 = -t * f_int / g_int
    threshold = tol * target

    def residual(s: float) -> float:
        try:
            return measure_volume(psi(body, bumps, t, s)) - target
        except (GraphFailure, DomainError):
            return float("nan")

    r0 = residual(s0)
    if np.isfinite(r0) and abs(r0) <= threshold:
        return s0
    if np.isfinite(r0):
        try:
            sol = root_scalar(residual, method="secant", x0=s0, x1=s0 + r0 / g_int,
                              xtol=1e-16, maxiter=50)
            if sol.converged and abs(residual(sol.root)) <= threshold:
                return float(sol.root)
        except (ValueError, RuntimeError, OverflowError) as e:
            logger.debug("secant solve failed: %s", e)
    logger.warning("volume constraint: secant failed at t=%.3g, trying bracket", t)

    width = max(abs(t) * (1.0 + abs(f_int / g_int)), 1e-8)
    for _ in range(30):
        lo, hi = s0 - width, s0 + width
        r_lo, r_hi = residual(lo), residual(hi)
        if np.isfinite(r_lo) and np.isfinite(r_hi) and r_lo > 0 > r_hi:
            root = brentq(residual, lo, hi, xtol=1e-16, maxiter=200)
            if abs(residual(root)) <= threshold:
                return float(root)
            break
        if not (np.isfinite(r_lo) and np.isfinite(r_hi)):
            break
        width *= 2.0
    raise NoBracket(f"在图有效范围内找不到满足体积约束的 s (t={t})")


# ---------------------------------------------------------------------------
# 扰动步与轨迹
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PerturbStep:
    step: int
    t: float
    body: RadialBody
    area: float
    volume: float
    b: float
    min_kappa: float
    case: int
    accepted: bool = True


@dataclass
class PerturbTrajectory:
    entries: List[PerturbStep] = field(default_factory=list)
    case_used: Optional[int] = None
    notes: List[str] = field(default_factory=list)

    @property
    def accepted_steps(self) -> int:
        return sum(1 for e in self.entries if e.step > 0)

    @property
    def final(self) -> RadialBody:
        return self.entries[-1].body

    def volume_drift(self) -> float:
        if not self.entries:
            return 0.0
        v0 = self.entries[0].volume
        return max(abs(e.volume / v0 - 1.0) for e in self.entries)

    def to_frame(self) -> pd.DataFrame:
        columns = ["step", "t", "area", "volume", "b", "min_kappa", "case"]
        rows = [(e.step, e.t, e.area, e.volume, e.b, e.min_kappa, e.case) for e in self.entries]
        return pd.DataFrame(rows, columns=columns)


def perturb_step(body: RadialBody, lam: float, bumps: Optional[BumpPair], t: float,
                 mode: str = "auto", config: Optional[PerturbationConfig] = None,
                 tolerances: Optional[ToleranceConfig] = None,
                 target_volume: Optional[float] = None, step_index: int = 1) -> PerturbStep:
    """一次保体积两峰扰动; 违反 λ-凸性时抛出 ConvexityExit"""
    config = config or PerturbationConfig()
    tolerances = tolerances or ToleranceConfig()
    tol = tolerances.curvature_for(body.n)
    report = shape_operator(body)
    if bumps is None:
        bumps = build_bumps(body, lam, mode, config, tol, report)
    area0, vol0 = measure(body)
    target = vol0 if target_volume is None else target_volume
    b = solve_volume_constraint(body, bumps, t, tolerances.volume, target, report)
    stepped = psi(body, bumps, t, b)
    area, volume = measure(stepped)
    check = lambda_convexity_check(stepped, lam, tol)
    if not check.is_lambda_convex:
        raise ConvexityExit(f"步长 t={t:.3g} 后 min κ₁ = {check.min_kappa:.6g} < λ - tol", check.min_kappa)
    accepted = (area - area0 >= AREA_GAIN_FACTOR * area0
                and abs(volume - target) <= max(tolerances.volume, 1e-14) * target * 10.0)
    return PerturbStep(step_index, t, stepped, area, volume, b, check.min_kappa, bumps.case, accepted)


def _seed_entry(body: RadialBody) -> PerturbStep:
    area, volume = measure(body)
    min_kappa = float(np.min(shape_operator(body).kappa_min))
    return PerturbStep(0, 0.0, body, area, volume, 0.0, min_kappa, 0)


def _attempt_step(body: RadialBody, lam: float, rank: int, config: PerturbationConfig,
                  tolerances: ToleranceConfig, target: float, index: int) -> Tuple[Optional[PerturbStep], str]:
    """第 rank 个候选鼓包组合: 从余量给出的步长开始, 失败时减半"""
    tol = tolerances.curvature_for(body.n)
    report = shape_operator(body)
    bumps = build_bumps(body, lam, config.mode, config, tol, report, rank)
    t = min(config.t, step_budget(body, lam, bumps, tol, config.margin_use, report))
    if not t > 0:
        return None, "no curvature room at the bumps"
    reason = "no area gain"
    for _ in range(config.max_halvings + 1):
        try:
            candidate = perturb_step(body, lam, bumps, t, config.mode, config, tolerances, target, index)
            if candidate.accepted:
                return candidate, ""
            reason = "no area gain"
        except (ConvexityExit, GraphFailure, NoBracket) as e:
            reason = f"{type(e).__name__}: {e}"
        logger.debug("step rejected at t=%.3g (%s)", t, reason)
        t *= 0.5
    return None, reason


def _ascend(body: RadialBody, lam: float, config: PerturbationConfig, tolerances: ToleranceConfig,
            max_accepted: int, stall_tol: Optional[float]) -> PerturbTrajectory:
    trajectory = PerturbTrajectory(entries=[_seed_entry(body)])
    target = trajectory.entries[0].volume
    current = trajectory.entries[0]
    while trajectory.accepted_steps < max_accepted:
        step, reason = None, "no candidate bumps"
        for rank in range(config.candidate_pairs):
            try:
                step, reason = _attempt_step(current.body, lam, rank, config, tolerances, target,
                                             trajectory.accepted_steps + 1)
            except TrivialBody as e:
                trajectory.notes.append(f"TrivialBody: {e}")
                logger.info("trajectory stopped: trivial body")
                return trajectory
            except DomainError as e:
                reason = f"{type(e).__name__}: {e}"
                break
            if step is not None:
                break
            logger.debug("candidate %d stalled (%s), trying the next pair", rank, reason)
        if step is None:
            trajectory.notes.append(f"stalled after {trajectory.accepted_steps} steps: {reason}")
            break
        if trajectory.case_used is None:
            trajectory.case_used = step.case
        gain = step.area - current.area
        trajectory.entries.append(step)
        current = step
        if stall_tol is not None and gain <= stall_tol * current.area:
            trajectory.notes.append(f"stalled: area gain {gain:.3e} below threshold")
            break
    return trajectory


def run_perturb_trajectory(body: RadialBody, lam: float,
                           config: Optional[PerturbationConfig] = None,
                           tolerances: Optional[ToleranceConfig] = None) -> PerturbTrajectory:
    """连续执行 config.steps 个被接受的扰动步; 步长取自曲率余量, 失败时减半, 再不行换下一组鼓包"""
    config = config or PerturbationConfig()
    tolerances = tolerances or ToleranceConfig()
    trajectory = _ascend(body, lam, config, tolerances, config.steps, None)
    logger.info("perturb trajectory: %d accepted steps, case %s", trajectory.accepted_steps,
                trajectory.case_used)
    return trajectory


# ---------------------------------------------------------------------------
# 面积最大化
# ---------------------------------------------------------------------------

def fd_curve_curvature(kind: SpaceformKind, rho_sorted: np.ndarray, spacing: float) -> np.ndarray:
    """按极角排序的 n=1 径向函数的三点差分曲率"""
    ahead, behind = np.roll(rho_sorted, -1), np.roll(rho_sorted, 1)
    d1 = (ahead - behind) / (2.0 * spacing)
    d2 = (ahead - 2.0 * rho_sorted + behind) / spacing ** 2
    f, fp, _ = warp_functions(kind, rho_sorted)
    return (2.0 * fp * d1 ** 2 - f * d2 + fp * f ** 2) / (d1 ** 2 + f ** 2) ** 1.5


@dataclass
class MaximizeResult:
    final: RadialBody
    trajectory: PerturbTrajectory
    polished: bool = False
    convex: bool = True
    min_kappa: float = float("nan")
    tight_fraction: float = float("nan")
    kappa_excess: np.ndarray = field(default_factory=lambda: np.zeros(0))
    notes: List[str] = field(default_factory=list)


def _corner_flags(kappa_sorted: np.ndarray, lam: float, factor: float) -> np.ndarray:
    corners = kappa_sorted > factor * lam
    dilated = corners | np.roll(corners, 1) | np.roll(corners, -1)
    return ~dilated


def curve_admissibility(body: RadialBody, lam: float, tol: float) -> Tuple[bool, float]:
    """n=1 折线的 λ-凸性: 每个节点的三点差分曲率 ≥ λ - tol

    角点处的离散曲率是转角除以间距, 远大于 λ; 返回值的第二项是光滑节点上的最小曲率
    """
    if body.n != 1:
        raise DomainError("折线判据只对 n=1 定义")
    order = body.grid.angular_order
    kappa = fd_curve_curvature(body.kind, body.rho[order], body.grid.spacing)
    smooth = body.smoothness_flags[order]
    min_smooth = float(np.min(kappa[smooth])) if np.any(smooth) else float(np.min(kappa))
    return bool(np.min(kappa) >= lam - tol), min_smooth


def _polish_curve(body: RadialBody, lam: float, target: float, config: PerturbationConfig,
                  tol: float) -> Optional[RadialBody]:
    """SLSQP: 在体积等式与 κ_i ≥ λ 约束下最大化测地多边形周长"""
    grid = body.grid
    order = grid.angular_order
    spacing = grid.spacing
    weights = grid.weights[order]
    directions = grid.nodes[order]
    kind = body.kind

    def perimeter(x: np.ndarray) -> float:
        pts = polar_points(kind, body.center.coords, body.frame, x, directions)
        return float(np.sum(model_distance(kind, pts, np.roll(pts, -1, axis=0))))

    def volume_gap(x: np.ndarray) -> float:
        return float(np.sum(weights * warp_power_integral(kind, x, 1))) / target - 1.0

    upper = 0.5 * np.pi - 1e-6 if kind is SpaceformKind.SPHERICAL else None
    x = body.rho[order]
    for attempt in range(POLISH_PASSES):
        result = minimize(
            lambda r: -perimeter(r), x, method="SLSQP",
            bounds=[(1e-6, upper)] * len(grid),
            constraints=[
                {"type": "eq", "fun": volume_gap},
                {"type": "ineq", "fun": lambda r: fd_curve_curvature(kind, r, spacing) - lam},
            ],
            options={"maxiter": config.polish_maxiter, "ftol": 1e-13},
        )
        logger.info("SLSQP polish pass %d: %s (%d iterations)", attempt + 1, result.message, result.nit)
        x = np.asarray(result.x, dtype=float)
        if not np.all(np.isfinite(x)) or np.any(x <= 0):
            return None
        feasible = (np.min(fd_curve_curvature(kind, x, spacing)) >= lam - tol
                    and abs(volume_gap(x)) <= POLISH_VOLUME_TOL)
        if result.success and feasible:
            break
    flags_sorted = _corner_flags(fd_curve_curvature(kind, x, spacing), lam, config.corner_factor)
    rho = np.empty_like(x)
    flags = np.empty_like(flags_sorted)
    rho[order] = x
    flags[order] = flags_sorted
    try:
        return body.with_rho(rho, flags)
    except DomainError:
        return None


def tightness(body: RadialBody, lam: float, tol: float) -> Tuple[float, np.ndarray]:
    """光滑节点上 κ₁ - λ ≤ 5·tol 的弧长 (曲面测度) 比例, 以及 κ₁ - λ 的分布"""
    report = shape_operator(body)
    smooth = body.smoothness_flags
    excess = report.kappa_min[smooth] - lam
    weights = report.area_weights[smooth]
    if weights.size == 0:
        return float("nan"), excess
    return float(np.sum(weights[excess <= 5.0 * tol]) / np.sum(weights)), excess


def maximize_area(body: RadialBody, lam: float, config: Optional[PerturbationConfig] = None,
                  tolerances: Optional[ToleranceConfig] = None) -> MaximizeResult:
    """重复扰动步直到停滞, 再做 λ-凸约束下的抛光; 总是返回目前最好的凸体"""
    config = config or PerturbationConfig()
    tolerances = tolerances or ToleranceConfig()
    tol = tolerances.curvature_for(body.n)
    trajectory = _ascend(body, lam, config, tolerances, config.max_steps, tolerances.stall)
    result = MaximizeResult(final=trajectory.final, trajectory=trajectory, notes=list(trajectory.notes))
    trivial = trajectory.accepted_steps == 0 and any(note.startswith("TrivialBody") for note in trajectory.notes)

    best_area = trajectory.entries[-1].area
    target = trajectory.entries[0].volume
    if config.polish and body.n == 1 and not trivial:
        try:
            polished = _polish_curve(trajectory.final, lam, target, config, tol)
        except (ValueError, DomainError) as e:
            polished = None
            result.notes.append(f"polish failed: {e}")
        if polished is not None:
            area, volume = measure(polished)
            convex, min_kappa = curve_admissibility(polished, lam, tol)
            volume_ok = abs(volume / target - 1.0) <= 1e-8
            if convex and volume_ok and area > best_area:
                result.final = polished
                result.polished = True
                result.convex, result.min_kappa = True, min_kappa
                trajectory.entries.append(PerturbStep(trajectory.accepted_steps + 1, 0.0, polished, area,
                                                      volume, 0.0, min_kappa, 0))
                logger.info("✓ polish accepted: area %.10g -> %.10g", best_area, area)
            else:
                result.notes.append(
                    f"polish rejected (convex={convex}, volume_ok={volume_ok}, "
                    f"area {area:.10g} vs {best_area:.10g})")
                logger.warning("polish rejected; keeping best-so-far body")
    if not result.polished:
        check = lambda_convexity_check(result.final, lam, tol)
        result.convex, result.min_kappa = check.is_lambda_convex, check.min_kappa
    result.tight_fraction, result.kappa_excess = tightness(result.final, lam, tol)
    return result


# ---------------------------------------------------------------------------
# 有限差分验证
# ---------------------------------------------------------------------------

@dataclass
class FiniteDifferenceReport:
    table: pd.DataFrame
    orders: Dict[str, float]
    relative_errors: Dict[str, float]
    passed: bool


def _variation_scales(body: RadialBody, vf: VariationField, report: CurvatureReport) -> Dict[str, float]:
    m, H, v, a = report.area_weights, report.mean, vf.v, vf.a
    potential = np.abs(stability_potential(body, report))
    dirichlet = float(abs(v @ (stiffness_matrix(body, report) @ v)))
    floor = 1e-300
    return {
        "dVol": max(float(np.sum(m * np.abs(v))), floor),
        "dArea": max(float(np.sum(m * np.abs(v * H))), floor),
        "d2Vol": max(float(np.sum(m * (v ** 2 * np.abs(H) + np.abs(a)))), floor),
        "d2Area": max(float(np.sum(m * (v ** 2 * (H ** 2 + potential) + np.abs(a * H)))) + dirichlet, floor),
    }


def _observed_order(estimates: np.ndarray, hs: np.ndarray, errors: np.ndarray,
                    scale: float) -> Tuple[float, bool]:
    """差分估计的收敛阶, 以及估计是否已稳定在舍入误差水平

    有三个以上步长时比较相邻估计之差, 不受解析值离散误差的影响; 否则退回到与解析值的误差
    """
    if estimates.size >= 3:
        coarse = abs(estimates[-3] - estimates[-2]) / scale
        fine = abs(estimates[-2] - estimates[-1]) / scale
        if fine <= FD_FLOOR:
            return float("nan"), True
        if coarse > 0:
            return float(np.log(coarse / fine) / np.log(hs[-2] / hs[-1])), False
        return float("nan"), False
    if errors[-1] <= FD_FLOOR:
        return float("nan"), True
    if errors.size >= 2 and errors[-2] > 0:
        return float(np.log(errors[-2] / errors[-1]) / np.log(hs[-2] / hs[-1])), False
    return float("nan"), False


def finite_difference_check(body: RadialBody, vf: VariationField, orders: Sequence[int] = (1, 2),
                            h_sequence: Sequence[float] = (4e-3, 2e-3, 1e-3),
                            rel_tol: Optional[float] = None,
                            report: Optional[CurvatureReport] = None) -> FiniteDifferenceReport:
    """解析变分与中心差分的比较表, 以及观测到的收敛阶"""
    report = report or shape_operator(body)
    rel_tol = (1e-6 if body.n == 1 else 1e-3) if rel_tol is None else rel_tol
    direction = report.normals
    dvol, darea = first_variations(body, vf, report)
    d2vol, d2area = second_variations(body, vf, report)
    analytic = {"dVol": dvol, "dArea": darea, "d2Vol": d2vol, "d2Area": d2area}
    scales = _variation_scales(body, vf, report)
    area0, vol0 = measure(body)

    rows = []
    for h in h_sequence:
        ap, vp = measure(deform(body, vf, h, direction))
        am, vm = measure(deform(body, vf, -h, direction))
        estimates = {
            "dVol": (vp - vm) / (2 * h), "dArea": (ap - am) / (2 * h),
            "d2Vol": (vp - 2 * vol0 + vm) / h ** 2, "d2Area": (ap - 2 * area0 + am) / h ** 2,
        }
        for name, value in estimates.items():
            order = 1 if name.startswith("d") and not name.startswith("d2") else 2
            if order not in orders:
                continue
            rows.append({"h": h, "quantity": name, "order": order, "analytic": analytic[name],
                         "finite_difference": value, "error": abs(value - analytic[name]),
                         "relative_error": abs(value - analytic[name]) / scales[name]})
    table = pd.DataFrame(rows, columns=["h", "quantity", "order", "analytic", "finite_difference",
                                        "error", "relative_error"])

    observed, final_errors, passed = {}, {}, True
    for name, group in table.groupby("quantity", sort=True):
        group = group.sort_values("h", ascending=False)
        errs = group["relative_error"].to_numpy()
        rate, settled = _observed_order(group["finite_difference"].to_numpy(), group["h"].to_numpy(),
                                        errs, scales[name])
        observed[name] = rate
        final_errors[name] = float(errs[-1])
        # 有限步长下观测阶允许 ORDER_ROUNDING 的偏差
        ok = errs[-1] <= rel_tol and (settled or (np.isfinite(rate) and rate >= ORDER_TARGET - ORDER_ROUNDING))
        if not ok:
            logger.warning("finite-difference check failed for %s: rel err %.3e, order %.2f",
                           name, errs[-1], rate)
        passed &= bool(ok)
    return FiniteDifferenceReport(table, observed, final_errors, passed)


def bprime_check(body: RadialBody, lam: float, h: float = 1e-3, mode: str = "case1",
                 config: Optional[PerturbationConfig] = None,
                 tolerances: Optional[ToleranceConfig] = None) -> Dict[str, float]:
    """体积约束解 b(t) 在 t=0 处的差分斜率 (单侧与中心)"""
    tolerances = tolerances or ToleranceConfig()
    report = shape_operator(body)
    bumps = build_bumps(body, lam, mode, config, tolerances.curvature_for(body.n), report)
    b_plus = solve_volume_constraint(body, bumps, h, tolerances.volume, None, report)
    b_minus = solve_volume_constraint(body, bumps, -h, tolerances.volume, None, report)
    b_zero = solve_volume_constraint(body, bumps, 0.0, tolerances.volume, None, report)
    return {
        "h": h, "case": bumps.case, "b_zero": b_zero, "b_plus": b_plus, "b_minus": b_minus,
        "one_sided": (b_plus - b_zero) / h,
        "centered": (b_plus - b_minus) / (2.0 * h),
    }
