"""
曲率分析模块 - 径向图的形状算子、主曲率、λ-凸性认证、严格点搜索和全局Blaschke包含检查

约定: ν 为内法向, 测地球的主曲率为正 (ϑ'/ϑ)
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from geometry_errors import DomainError, NoStrictPoint, NumericalDegeneracy, ReportError
from radial_body import RadialBody, area_elements
from radial_derivatives import grid_derivatives
from spaceform_geometry import (
    Point, TangentVector, exp_rows, model_distance, radius_of_lambda, warp_functions,
)

logger = logging.getLogger(__name__)

METRIC_DETERMINANT_FLOOR = 1e-14
NEIGHBORHOOD_SPACINGS = 5
BLASCHKE_CHUNK = 512


def default_tolerance(n: int) -> float:
    """曲率模板精度对应的默认容差"""
    return 1e-6 if n == 1 else 1e-3


@dataclass(frozen=True, eq=False)
class CurvatureReport:
    """逐节点的曲率数据"""
    kind: object
    normals: np.ndarray          # (N, dim) 内法向
    metric: np.ndarray           # (N, n, n)
    second_form: np.ndarray      # (N, n, n)
    kappa: np.ndarray            # (N, n) 升序
    mean: np.ndarray             # (N,) H = tr A
    trace_a2: np.ndarray         # (N,) tr(A²)
    boundary_points: np.ndarray  # (N, dim)
    area_weights: np.ndarray     # (N,) 每节点曲面测度
    gradient: np.ndarray         # (N, n) σ-梯度
    angular_frames: np.ndarray   # (N, n, dim) 边界点处的单位角向量
    scheme: str

    @property
    def kappa_min(self) -> np.ndarray:
        return self.kappa[:, 0]

    def normal(self, node: int) -> TangentVector:
        return TangentVector(Point(self.kind, self.boundary_points[node]), self.normals[node])

    def to_frame(self) -> pd.DataFrame:
        columns = {"node": np.arange(self.kappa.shape[0])}
        for i in range(self.kappa.shape[1]):
            columns[f"k{i + 1}"] = self.kappa[:, i]
        columns["H"] = self.mean
        return pd.DataFrame(columns)

    def to_csv(self, path: Path):
        try:
            self.to_frame().to_csv(path, index=False, float_format="%.17g")
        except OSError as e:
            raise ReportError(f"无法写入曲率表: {e}", str(path)) from e


def _angular_frames(body: RadialBody) -> np.ndarray:
    """边界点处 σ 标架对应的单位向量 (沿径向测地线平移到边界)"""
    if body.n == 1:
        tangents = np.column_stack([-body.grid.nodes[:, 1], body.grid.nodes[:, 0]])
        return (tangents @ body.frame.T)[:, None, :]
    return np.einsum("nkj,dj->nkd", body.grid.frames, body.frame)


def shape_operator(body: RadialBody, scheme: Optional[str] = None) -> CurvatureReport:
    """径向图 r = ρ(ξ) 在 dr² + ϑ²(r)σ 中的第二基本形式与主曲率"""
    n = body.n
    derivs = grid_derivatives(body.grid, body.rho, body.smoothness_flags, scheme)
    u, hess = derivs.grad, derivs.hess
    f, fp, _ = warp_functions(body.kind, body.rho)
    identity = np.eye(n)[None, :, :]

    metric = f[:, None, None] ** 2 * identity + u[:, :, None] * u[:, None, :]
    det = np.linalg.det(metric)
    if np.any(det < METRIC_DETERMINANT_FLOOR):
        bad = int(np.argmin(det))
        raise NumericalDegeneracy(f"节点 {bad} 处诱导度量退化 (det={det[bad]:.3e})")

    grad_sq = np.sum(u ** 2, axis=1)
    v = np.sqrt(1.0 + grad_sq / f ** 2)
    second = (-hess + 2.0 * (fp / f)[:, None, None] * u[:, :, None] * u[:, None, :]
              + (f * fp)[:, None, None] * identity) / v[:, None, None]

    if n == 1:
        kappa = (second[:, 0, 0] / metric[:, 0, 0])[:, None]
    else:
        chol = np.linalg.cholesky(metric)
        half = np.linalg.solve(chol, second)
        sym = np.linalg.solve(chol, np.swapaxes(half, 1, 2))
        sym = 0.5 * (sym + np.swapaxes(sym, 1, 2))
        kappa = np.linalg.eigvalsh(sym)

    frames = _angular_frames(body)
    radial = body.radial_unit_vectors
    outward = radial - np.einsum("nk,nkd->nd", u / f[:, None], frames)
    normals = -outward / v[:, None]

    report = CurvatureReport(
        kind=body.kind,
        normals=normals,
        metric=metric,
        second_form=second,
        kappa=kappa,
        mean=np.sum(kappa, axis=1),
        trace_a2=np.sum(kappa ** 2, axis=1),
        boundary_points=body.boundary_points,
        area_weights=area_elements(body, u),
        gradient=u,
        angular_frames=frames,
        scheme=derivs.scheme,
    )
    logger.debug("shape operator (%s): κ₁ ∈ [%.6g, %.6g]", derivs.scheme,
                 report.kappa_min.min(), report.kappa_min.max())
    return report


# ---------------------------------------------------------------------------
# 支撑球
# ---------------------------------------------------------------------------

def supporting_centers(body: RadialBody, lam: float,
                       report: Optional[CurvatureReport] = None) -> np.ndarray:
    """每个节点的支撑球中心 exp_p(R_Σ(λ)·ν_p)"""
    radius = radius_of_lambda(body.kind, lam).require_radius()
    report = report or shape_operator(body)
    return exp_rows(body.kind, report.boundary_points, radius * report.normals)


def neighborhood_radius(body: RadialBody, report: CurvatureReport) -> float:
    """δ = 5 个网格间距 (以边界上相邻节点的测地距离计)"""
    rows, cols = body.grid.adjacency.nonzero()
    pts = report.boundary_points
    step = float(np.median(model_distance(body.kind, pts[rows], pts[cols])))
    return NEIGHBORHOOD_SPACINGS * step


def _ball_contains_neighborhood(body: RadialBody, report: CurvatureReport, node: int,
                                centers: np.ndarray, radius: float, delta: float,
                                slack: float) -> bool:
    pts = report.boundary_points
    near = model_distance(body.kind, pts, pts[node][None, :]) <= delta
    for center in np.atleast_2d(centers):
        dist = model_distance(body.kind, pts[near], center[None, :])
        if np.all(dist <= radius + slack):
            return True
    return False


def _supporting_slack(tol: float, delta: float, radius: float) -> float:
    return tol * delta ** 2 + 1e-12 * max(1.0, radius)


def supporting_ball_test(body: RadialBody, node: int, lam: float,
                         report: Optional[CurvatureReport] = None,
                         tol: Optional[float] = None) -> bool:
    """B̄_R(exp_p(Rν_p)) 是否包含 p 的 δ-邻域内的全部边界节点"""
    radius = radius_of_lambda(body.kind, lam).require_radius()
    report = report or shape_operator(body)
    tol = default_tolerance(body.n) if tol is None else tol
    delta = neighborhood_radius(body, report)
    center = exp_rows(body.kind, report.boundary_points[node], radius * report.normals[node])
    return _ball_contains_neighborhood(body, report, node, center, radius, delta,
                                       _supporting_slack(tol, delta, radius))


# ---------------------------------------------------------------------------
# λ-凸性
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LambdaCheck:
    lam: float
    is_lambda_convex: bool
    min_kappa: float
    witness_strict: Optional[int]
    violation_node: int
    method: str
    failed_nonsmooth: tuple = ()
    note: str = ""


def _lowest_argmax(values: np.ndarray, candidates: np.ndarray, tol: float) -> int:
    top = np.max(values[candidates])
    return int(candidates[np.flatnonzero(values[candidates] >= top - tol)[0]])


def lambda_convexity_check(body: RadialBody, lam: float, tol: Optional[float] = None,
                           report: Optional[CurvatureReport] = None) -> LambdaCheck:
    """光滑节点按 κ₁ ≥ λ - tol 认证, 非光滑节点按支撑球邻域包含认证"""
    tol = default_tolerance(body.n) if tol is None else tol
    report = report or shape_operator(body)
    k1 = report.kappa_min
    smooth = body.smoothness_flags
    certified = np.flatnonzero(smooth) if np.any(smooth) else np.arange(k1.size)
    min_kappa = float(np.min(k1[certified]))
    violation = int(certified[np.argmin(k1[certified])])

    failed = []
    method = "curvature"
    note = ""
    rough = np.flatnonzero(~smooth)
    if rough.size:
        lam_class = radius_of_lambda(body.kind, lam, strict=False)
        if lam_class.in_interval:
            method = "curvature+supporting-ball"
            note = "非光滑节点采用离散支撑球邻域包含判据, 这是局部λ-凸定义的一种离散选择"
            radius = lam_class.radius
            centers = supporting_centers(body, lam, report)
            delta = neighborhood_radius(body, report)
            slack = _supporting_slack(tol, delta, radius)
            pts = report.boundary_points
            for node in rough:
                near_smooth = certified[model_distance(body.kind, pts[certified], pts[node][None, :]) <= delta]
                if near_smooth.size == 0 or not _ball_contains_neighborhood(
                        body, report, int(node), centers[near_smooth], radius, delta, slack):
                    failed.append(int(node))
        else:
            note = "λ ∉ I_Σ, 非光滑节点无法构造支撑球, 仅按曲率认证"

    convex = min_kappa >= lam - tol and not failed
    strict = k1[certified] > lam + tol
    witness = _lowest_argmax(k1, certified, tol) if np.any(strict) else None
    if not convex:
        logger.info("body is not %.6g-convex: min κ₁=%.6g at node %d", lam, min_kappa, violation)
    return LambdaCheck(lam=float(lam), is_lambda_convex=bool(convex), min_kappa=min_kappa,
                       witness_strict=witness, violation_node=violation, method=method,
                       failed_nonsmooth=tuple(failed), note=note)


def strict_point(body: RadialBody, lam: float, tol: Optional[float] = None,
                 report: Optional[CurvatureReport] = None) -> int:
    """κ₁ 最大的光滑节点 (并列时取最小下标)"""
    tol = default_tolerance(body.n) if tol is None else tol
    report = report or shape_operator(body)
    k1 = report.kappa_min
    candidates = np.flatnonzero(body.smoothness_flags)
    if candidates.size == 0:
        raise NoStrictPoint("没有光滑节点")
    node = _lowest_argmax(k1, candidates, tol)
    if k1[node] <= lam + tol:
        raise NoStrictPoint(f"max κ₁ = {k1[node]:.10g} ≤ λ + tol, 凸体是半径 R_Σ(λ) 的测地球")
    return node


def global_blaschke_check(body: RadialBody, lam: float, tol: Optional[float] = None,
                          report: Optional[CurvatureReport] = None,
                          distance_tol: Optional[float] = None) -> bool:
    """每个光滑节点的支撑球都包含全部边界节点"""
    radius = radius_of_lambda(body.kind, lam).require_radius()
    report = report or shape_operator(body)
    check = lambda_convexity_check(body, lam, tol, report)
    if not check.is_lambda_convex:
        raise DomainError(f"凸体不是 λ-凸的 (min κ₁ = {check.min_kappa:.6g} < λ = {lam})")
    if distance_tol is None:
        distance_tol = 1e-8 if body.n == 1 else 1e-4
    centers = supporting_centers(body, lam, report)[body.smoothness_flags]
    pts = report.boundary_points
    worst = -np.inf
    for start in range(0, centers.shape[0], BLASCHKE_CHUNK):
        block = centers[start:start + BLASCHKE_CHUNK]
        dist = model_distance(body.kind, block[:, None, :], pts[None, :, :])
        worst = max(worst, float(np.max(dist)) - radius)
    logger.debug("Blaschke check: worst excess %.3e", worst)
    return worst <= distance_tol
