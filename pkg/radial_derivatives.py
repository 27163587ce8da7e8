"""
球面网格上的导数格式
n=1: 全光滑时用FFT谱导数, 否则用三点周期中心差分
n=2: 二环邻域在指数坐标下的三次最小二乘拟合
返回的梯度/Hessian 分量都取自 σ 的标准正交标架 (n=1 为 d/dθ)
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from geometry_errors import DomainError
from sphere_grid import SphereGrid, sphere_log

logger = logging.getLogger(__name__)

SPECTRAL = "spectral"
FINITE_DIFFERENCE = "fd3"
LEAST_SQUARES = "lsq-cubic"


@dataclass(frozen=True)
class GridDerivatives:
    """节点上的一阶与二阶导数"""
    grad: np.ndarray  # (N, n)
    hess: np.ndarray  # (N, n, n)
    scheme: str


def _uniform_check(grid: SphereGrid) -> np.ndarray:
    order = grid.angular_order
    gaps = np.diff(np.append(grid.angles[order], grid.angles[order][0] + 2.0 * np.pi))
    if np.max(np.abs(gaps - grid.spacing)) > 1e-9:
        raise DomainError("n=1 导数格式要求均匀角度网格")
    return order


def spectral_derivatives(grid: SphereGrid, values: np.ndarray) -> GridDerivatives:
    order = _uniform_check(grid)
    count = len(grid)
    coeffs = np.fft.rfft(np.asarray(values, dtype=float)[order])
    k = np.fft.rfftfreq(count, d=1.0 / count)
    first = 1j * k * coeffs
    if count % 2 == 0:
        first[-1] = 0.0
    d1 = np.fft.irfft(first, n=count)
    d2 = np.fft.irfft(-(k ** 2) * coeffs, n=count)
    grad = np.empty(count)
    hess = np.empty(count)
    grad[order] = d1
    hess[order] = d2
    return GridDerivatives(grad[:, None], hess[:, None, None], SPECTRAL)


def central_differences(grid: SphereGrid, values: np.ndarray) -> GridDerivatives:
    order = _uniform_check(grid)
    h = grid.spacing
    f = np.asarray(values, dtype=float)[order]
    ahead, behind = np.roll(f, -1), np.roll(f, 1)
    grad = np.empty(len(grid))
    hess = np.empty(len(grid))
    grad[order] = (ahead - behind) / (2.0 * h)
    hess[order] = (ahead - 2.0 * f + behind) / h ** 2
    return GridDerivatives(grad[:, None], hess[:, None, None], FINITE_DIFFERENCE)


def _cubic_design(coords: np.ndarray) -> np.ndarray:
    y1, y2 = coords[..., 0], coords[..., 1]
    return np.stack([
        y1, y2,
        0.5 * y1 ** 2, y1 * y2, 0.5 * y2 ** 2,
        y1 ** 3, y1 ** 2 * y2, y1 * y2 ** 2, y2 ** 3,
    ], axis=-1)


def least_squares_derivatives(grid: SphereGrid, values: np.ndarray) -> GridDerivatives:
    """指数坐标下的三次拟合; 常数项固定为节点值"""
    values = np.asarray(values, dtype=float)
    table, mask = grid.two_ring
    safe = np.where(mask, table, 0)
    h = grid.spacing
    coords = sphere_log(grid.nodes[:, None, :], grid.frames[:, None, :, :], grid.nodes[safe]) / h
    design = _cubic_design(coords) * mask[..., None]
    rhs = (values[safe] - values[:, None]) * mask
    solution = np.einsum("nij,nj->ni", np.linalg.pinv(design), rhs)
    grad = solution[:, 0:2] / h
    hess = np.empty((len(grid), 2, 2))
    hess[:, 0, 0] = solution[:, 2]
    hess[:, 0, 1] = hess[:, 1, 0] = solution[:, 3]
    hess[:, 1, 1] = solution[:, 4]
    return GridDerivatives(grad, hess / h ** 2, LEAST_SQUARES)


def grid_derivatives(grid: SphereGrid, values: np.ndarray,
                     smooth: Optional[np.ndarray] = None,
                     scheme: Optional[str] = None) -> GridDerivatives:
    """按网格维数和光滑标记选择导数格式"""
    if grid.n == 2:
        return least_squares_derivatives(grid, values)
    if scheme is None:
        all_smooth = smooth is None or bool(np.all(smooth))
        scheme = SPECTRAL if all_smooth else FINITE_DIFFERENCE
    if scheme == SPECTRAL:
        return spectral_derivatives(grid, values)
    if scheme == FINITE_DIFFERENCE:
        return central_differences(grid, values)
    raise DomainError(f"未知的导数格式: {scheme}")
