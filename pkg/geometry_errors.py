"""
几何实验室异常定义 - 各模块共用的错误类型
"""


class GeometryLabError(Exception):
    """所有实验室错误的基类"""


class DomainError(GeometryLabError, ValueError):
    """参数超出定义域 (半径、λ区间、对径点等)"""


class NumericalDegeneracy(GeometryLabError):
    """数值退化，例如诱导度量行列式过小"""


class DegenerateLens(DomainError):
    """两个支撑球中心重合，透镜退化为球"""


class NoStrictPoint(GeometryLabError):
    """不存在最小主曲率严格大于λ的点"""


class TrivialBody(GeometryLabError):
    """凸体是半径为R_Σ(λ)的测地球 (平凡情形)"""


class MarginViolation(GeometryLabError):
    """包围球半径未严格小于R_Σ(λ)"""


class ContainmentViolation(GeometryLabError):
    """凸体未包含在由支撑球构造的透镜中"""


class GraphFailure(GeometryLabError):
    """变形后的曲面不再是关于中心的径向图"""


class NoBracket(GeometryLabError):
    """体积约束在有效参数范围内无解"""


class ConvexityExit(GeometryLabError):
    """步进后违反 κ₁ ≥ λ - tol"""

    def __init__(self, message: str, min_kappa: float = float("nan")):
        super().__init__(message)
        self.min_kappa = min_kappa


class ConfigError(GeometryLabError):
    """实验配置无法解析或校验失败"""


class ReportError(GeometryLabError):
    """报告文件写入失败"""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{message} ({path})" if path else message)
        self.path = path


class NumericalFailure(GeometryLabError):
    """numpy/scipy 在计算中抛出的线性代数或浮点错误"""

    def __init__(self, message: str, cause_type: str = ""):
        super().__init__(message)
        self.cause_type = cause_type
