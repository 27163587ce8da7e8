"""
变分公式与稳定性 - 面积/体积的一阶和二阶变分、稳定算子 T = Δ + Ric(ν,ν) + tr(A²)
以及强稳定性的上解判据和Killing场判据
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg, sparse
from scipy.sparse.linalg import eigsh

from curvature_analysis import CurvatureReport, shape_operator
from geometry_errors import DomainError
from radial_body import RadialBody
from radial_derivatives import (
    FINITE_DIFFERENCE, SPECTRAL, grid_derivatives, least_squares_derivatives,
)
from spaceform_geometry import (
    Point, TangentVector, killing_generator, model_distance, model_dot, warp_functions,
)

logger = logging.getLogger(__name__)

DENSE_EIGEN_LIMIT = 3000


@dataclass(frozen=True, eq=False)
class VariationField:
    """法向速度 v 与法向加速度 a, 在支集 Ω 外为零"""
    support: np.ndarray
    v: np.ndarray
    a: Optional[np.ndarray] = None

    def __post_init__(self):
        support = np.array(self.support, dtype=bool)
        v = np.array(self.v, dtype=float)
        a = np.zeros_like(v) if self.a is None else np.array(self.a, dtype=float)
        if v.shape != support.shape or a.shape != support.shape:
            raise DomainError("变分场长度与支集不一致")
        if np.any(v[~support] != 0) or np.any(a[~support] != 0):
            raise DomainError("法向速度/加速度在支集外必须为零")
        for name, arr in (("support", support), ("v", v), ("a", a)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_values(cls, v: np.ndarray, a: Optional[np.ndarray] = None) -> "VariationField":
        v = np.asarray(v, dtype=float)
        support = v != 0
        if a is not None:
            support = support | (np.asarray(a) != 0)
        return cls(support=support, v=v, a=a)

    def scaled(self, factor: float) -> "VariationField":
        return VariationField(self.support, factor * self.v, factor * self.a)


def _report(body: RadialBody, report: Optional[CurvatureReport]) -> CurvatureReport:
    return report if report is not None else shape_operator(body)


def first_variations(body: RadialBody, vf: VariationField,
                     report: Optional[CurvatureReport] = None):
    """(dVol, dArea) = (-∫v, -∫vH)"""
    report = _report(body, report)
    m = report.area_weights
    return float(-np.sum(m * vf.v)), float(-np.sum(m * vf.v * report.mean))


# ---------------------------------------------------------------------------
# Laplace-Beltrami 与稳定算子
# ---------------------------------------------------------------------------

def _arc_element(body: RadialBody, report: CurvatureReport) -> np.ndarray:
    f, _, _ = warp_functions(body.kind, body.rho)
    return np.sqrt(f ** 2 + report.gradient[:, 0] ** 2)


def _laplacian_curve(body: RadialBody, report: CurvatureReport, values: np.ndarray) -> np.ndarray:
    """n=1: Δf = (1/L) d/dθ((1/L) df/dθ), L 为弧长元"""
    scheme = SPECTRAL if report.scheme == SPECTRAL else FINITE_DIFFERENCE
    arc = _arc_element(body, report)
    inner = grid_derivatives(body.grid, values, scheme=scheme).grad[:, 0] / arc
    return grid_derivatives(body.grid, inner, scheme=scheme).grad[:, 0] / arc


def _laplacian_surface(body: RadialBody, report: CurvatureReport, values: np.ndarray) -> np.ndarray:
    """n=2: 在 σ 的法坐标中 Δf = g^{ij}(f_ij - Γ^m_ij f_m)"""
    rho_d = least_squares_derivatives(body.grid, body.rho)
    f_d = least_squares_derivatives(body.grid, values)
    u, hess = rho_d.grad, rho_d.hess
    w, wp, _ = warp_functions(body.kind, body.rho)
    ginv = np.linalg.inv(report.metric)
    eye = np.eye(2)
    # dg[k, i, j] = ∂_k g_ij
    dg = (2.0 * (w * wp)[:, None, None, None] * u[:, :, None, None] * eye[None, None, :, :]
          + hess[:, :, :, None] * u[:, None, None, :]
          + u[:, None, :, None] * hess[:, :, None, :])
    # lowered[n, i, j, l] = ½(∂_i g_jl + ∂_j g_il - ∂_l g_ij)
    lowered = 0.5 * (dg + np.swapaxes(dg, 1, 2) - np.transpose(dg, (0, 2, 3, 1)))
    christoffel = np.einsum("nml,nijl->nmij", ginv, lowered)
    corrected = f_d.hess - np.einsum("nmij,nm->nij", christoffel, f_d.grad)
    return np.einsum("nij,nij->n", ginv, corrected)


def laplace_beltrami(body: RadialBody, values: np.ndarray,
                     report: Optional[CurvatureReport] = None) -> np.ndarray:
    report = _report(body, report)
    values = np.asarray(values, dtype=float)
    if body.n == 1:
        return _laplacian_curve(body, report, values)
    return _laplacian_surface(body, report, values)


def stability_potential(body: RadialBody, report: CurvatureReport) -> np.ndarray:
    """Ric_Σ(ν,ν) + tr(A²)"""
    return body.kind.ricci_normal(body.n) + report.trace_a2


def stability_operator_apply(body: RadialBody, f: np.ndarray,
                             report: Optional[CurvatureReport] = None) -> np.ndarray:
    """T(f) = Δf + Ric_Σ(ν,ν)·f + tr(A²)·f"""
    report = _report(body, report)
    f = np.asarray(f, dtype=float)
    return laplace_beltrami(body, f, report) + stability_potential(body, report) * f


def second_variations(body: RadialBody, vf: VariationField,
                      report: Optional[CurvatureReport] = None):
    """(d²Vol, d²Area) = (∫(v²H - a), ∫(-vT(v) + H²v² - aH))"""
    report = _report(body, report)
    m, H = report.area_weights, report.mean
    v, a = vf.v, vf.a
    tv = stability_operator_apply(body, v, report)
    d2vol = np.sum(m * (v ** 2 * H - a))
    d2area = np.sum(m * (-v * tv + H ** 2 * v ** 2 - a * H))
    return float(d2vol), float(d2area)


# ---------------------------------------------------------------------------
# 对称二次型
# ---------------------------------------------------------------------------

def _curve_stiffness(body: RadialBody, report: CurvatureReport) -> sparse.csr_matrix:
    count = len(body.grid)
    order = body.grid.angular_order
    arc = _arc_element(body, report)[order]
    h = body.grid.spacing
    if report.scheme == SPECTRAL:
        k = np.fft.rfftfreq(count, d=1.0 / count)
        multiplier = 1j * k
        if count % 2 == 0:
            multiplier[-1] = 0.0
        diff = np.fft.irfft(multiplier[:, None] * np.fft.rfft(np.eye(count), axis=0), n=count, axis=0)
        sorted_matrix = h * diff.T @ (diff / arc[:, None])
    else:
        forward = (np.roll(np.eye(count), 1, axis=1) - np.eye(count)) / h
        mid = 0.5 * (arc + np.roll(arc, -1))
        sorted_matrix = h * forward.T @ (forward / mid[:, None])
    matrix = np.empty_like(sorted_matrix)
    matrix[np.ix_(order, order)] = sorted_matrix
    return sparse.csr_matrix(0.5 * (matrix + matrix.T))


def _cotangent_stiffness(body: RadialBody, report: CurvatureReport) -> sparse.csr_matrix:
    faces = body.grid.faces
    pts = report.boundary_points
    count = len(body.grid)
    corners = [faces[:, k] for k in range(3)]
    # 边长 l_k 对着顶点 k
    lengths = [model_distance(body.kind, pts[corners[(k + 1) % 3]], pts[corners[(k + 2) % 3]])
               for k in range(3)]
    s = 0.5 * (lengths[0] + lengths[1] + lengths[2])
    area = np.sqrt(np.maximum(s * (s - lengths[0]) * (s - lengths[1]) * (s - lengths[2]), 1e-300))
    rows, cols, data = [], [], []
    for k in range(3):
        a, b, c = lengths[k], lengths[(k + 1) % 3], lengths[(k + 2) % 3]
        cot = (b ** 2 + c ** 2 - a ** 2) / (4.0 * area)
        i, j = corners[(k + 1) % 3], corners[(k + 2) % 3]
        rows += [i, j, i, j]
        cols += [j, i, i, j]
        data += [-0.5 * cot, -0.5 * cot, 0.5 * cot, 0.5 * cot]
    return sparse.csr_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(count, count))


def stiffness_matrix(body: RadialBody, report: Optional[CurvatureReport] = None) -> sparse.csr_matrix:
    """离散 Dirichlet 能量 ∫|∇f|² 的矩阵"""
    report = _report(body, report)
    if body.n == 1:
        return _curve_stiffness(body, report)
    return _cotangent_stiffness(body, report)


def stability_matrix(body: RadialBody, report: Optional[CurvatureReport] = None) -> sparse.csr_matrix:
    """-∫fT(f) 的对称双线性形式: 刚度矩阵减去势能的集中质量项"""
    report = _report(body, report)
    potential = report.area_weights * stability_potential(body, report)
    return (stiffness_matrix(body, report) - sparse.diags(potential)).tocsr()


def _require_support(omega: np.ndarray, f: np.ndarray):
    if np.any(f[~omega] != 0):
        raise DomainError("检验函数必须在 Ω 内紧支")


def stability_quadratic_form(body: RadialBody, omega: np.ndarray, f: np.ndarray,
                             report: Optional[CurvatureReport] = None) -> float:
    """-∫_Ω f T(f)"""
    omega = np.asarray(omega, dtype=bool)
    f = np.asarray(f, dtype=float)
    _require_support(omega, f)
    matrix = stability_matrix(body, report)
    return float(f @ (matrix @ f))


def stability_spectrum(body: RadialBody, omega: np.ndarray, k: int = 4,
                       report: Optional[CurvatureReport] = None) -> np.ndarray:
    """Ω 上 Dirichlet 条件下 -T 的最低 k 个特征值 (以曲面测度为质量)"""
    report = _report(body, report)
    idx = np.flatnonzero(np.asarray(omega, dtype=bool))
    if idx.size == 0:
        raise DomainError("Ω 为空")
    k = min(k, idx.size)
    matrix = stability_matrix(body, report)[idx][:, idx]
    mass = report.area_weights[idx]
    if idx.size <= DENSE_EIGEN_LIMIT:
        values = linalg.eigh(matrix.toarray(), np.diag(mass), eigvals_only=True,
                             subset_by_index=[0, k - 1])
        return np.asarray(values)
    shift = -1.0 - float(np.max(np.abs(stability_potential(body, report))))
    values = eigsh(matrix, k=k, M=sparse.diags(mass), sigma=shift, which="LM",
                   return_eigenvectors=False)
    return np.sort(values)


# ---------------------------------------------------------------------------
# 强稳定性判据
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StabilityCertificate:
    certified: bool
    max_t_u: float
    tolerance: float
    cross_validated: Optional[bool] = None
    min_form: Optional[float] = None

    def __bool__(self) -> bool:
        return self.certified


def interior_of(body: RadialBody, omega: np.ndarray) -> np.ndarray:
    """Ω 中所有邻居也在 Ω 中的节点"""
    omega = np.asarray(omega, dtype=bool)
    outside = (~omega).astype(float)
    touches = body.grid.adjacency @ outside > 0
    return omega & ~touches


def random_test_functions(body: RadialBody, omega: np.ndarray, count: int,
                          rng: np.random.Generator, report: CurvatureReport) -> np.ndarray:
    """Ω 内紧支、均值为零的随机二次多项式检验函数"""
    inner = interior_of(body, omega)
    pts = report.boundary_points
    dim = pts.shape[1]
    pairs = [(i, j) for i in range(dim) for j in range(i, dim)]
    basis = np.column_stack([np.ones(pts.shape[0]), pts] + [pts[:, i] * pts[:, j] for i, j in pairs])
    coeffs = rng.normal(size=(basis.shape[1], count))
    samples = (basis @ coeffs) * inner[:, None]
    m = report.area_weights * inner
    if m.sum() > 0:
        samples -= (m @ samples / m.sum())[None, :] * inner[:, None]
    return samples.T


def supersolution_stability_test(body: RadialBody, omega: np.ndarray, u: np.ndarray,
                                 tol: Optional[float] = None, samples: int = 100,
                                 rng: Optional[np.random.Generator] = None,
                                 report: Optional[CurvatureReport] = None) -> StabilityCertificate:
    """Ω 上存在 u > 0 且 T(u) ≤ 0 时认证强稳定, 并用随机检验函数交叉验证"""
    report = _report(body, report)
    omega = np.asarray(omega, dtype=bool)
    u = np.asarray(u, dtype=float)
    if np.any(u[omega] <= 0):
        raise DomainError("上解 u 在 Ω 上必须为正")
    if tol is None:
        tol = 1e-5 if body.n == 1 else 5e-2
    scale = max(1.0, float(np.max(np.abs(u[omega]))))
    tu = stability_operator_apply(body, u, report)
    check_nodes = interior_of(body, omega)
    if not np.any(check_nodes):
        check_nodes = omega
    max_tu = float(np.max(tu[check_nodes]))
    certified = max_tu <= tol * scale
    if not certified:
        return StabilityCertificate(False, max_tu, tol * scale)

    rng = rng or np.random.default_rng(0)
    matrix = stability_matrix(body, report)
    tests = random_test_functions(body, omega, samples, rng, report)
    forms = np.einsum("si,si->s", tests, (matrix @ tests.T).T)
    nontrivial = np.linalg.norm(tests, axis=1) > 0
    min_form = float(np.min(forms[nontrivial])) if np.any(nontrivial) else float("nan")
    validated = bool(np.all(forms[nontrivial] > 0))
    if not validated:
        logger.warning("supersolution certificate not confirmed by random test functions (min %.3e)", min_form)
    return StabilityCertificate(True, max_tu, tol * scale, validated, min_form)


def killing_normal_component(body: RadialBody, direction: TangentVector,
                             report: Optional[CurvatureReport] = None) -> np.ndarray:
    """每个节点处 ⟨ν, X⟩"""
    report = _report(body, report)
    field = killing_generator(direction).field(report.boundary_points)
    return model_dot(body.kind, report.normals, field)


def patch_killing_direction(body: RadialBody, omega: np.ndarray,
                            report: Optional[CurvatureReport] = None) -> TangentVector:
    """以 Ω 中 κ₁ 最大的节点为基点、其法向为方向的Killing场 (X_{p₀} = ν_{p₀})"""
    report = _report(body, report)
    idx = np.flatnonzero(np.asarray(omega, dtype=bool))
    if idx.size == 0:
        raise DomainError("Ω 为空")
    node = int(idx[np.argmax(report.kappa_min[idx])])
    return TangentVector(Point(body.kind, report.boundary_points[node]), report.normals[node])


def killing_stability_test(body: RadialBody, omega: np.ndarray, direction: TangentVector,
                           report: Optional[CurvatureReport] = None) -> bool:
    """min_Ω ⟨ν, X⟩ > 0 时 Ω 强稳定"""
    omega = np.asarray(omega, dtype=bool)
    if not np.any(omega):
        return False
    component = killing_normal_component(body, direction, report)[omega]
    stable = bool(np.min(component) > 0)
    logger.debug("Killing test: min ⟨ν,X⟩ = %.3e -> %s", np.min(component), stable)
    return stable
