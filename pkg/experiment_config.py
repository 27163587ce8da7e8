"""
实验配置 - 带显式默认值的 dataclass 配置树
JSON 文件加载、环境变量容差覆盖、配置哈希
"""

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

from geometry_errors import ConfigError, DomainError
from spaceform_geometry import SpaceformKind

ENV_PREFIX = "REVISO_TOL_"

BODY_SHAPES = ("ball", "perturbed_ball", "ellipsoid", "lens", "file", "random")

SUBCOMMANDS = (
    "spaceform-table", "measure", "check", "variation-verify",
    "perturb", "maximize", "lens",
)


@dataclass
class GridConfig:
    """球面网格配置"""
    n: int = 1
    size: int = 512
    level: int = 5


@dataclass
class BodyConfig:
    """种子凸体描述"""
    shape: str = "ellipsoid"          # ball | perturbed_ball | ellipsoid | lens | file | random
    radius: float = 1.0
    axes: List[float] = field(default_factory=lambda: [1.0, 0.8])
    amplitude: float = 0.0
    mode: int = 2
    lens_lambda: float = 1.0
    lens_distance: float = 1.0
    path: Optional[str] = None
    trials: int = 200                 # shape="random" 时随机凸体的个数


@dataclass
class LensConfig:
    """透镜与包围球实验配置"""
    distance: float = 1.0
    boundary_samples: Optional[int] = None
    trials: int = 200
    beta_points: int = 100
    beta_samples: int = 65
    oracle_resolution: int = 201


@dataclass
class PerturbationConfig:
    """两峰扰动、体积约束和面积最大化参数"""
    t: float = 1e-3
    steps: int = 10
    max_halvings: int = 20
    mode: str = "auto"                # auto | case1 | case2
    bump_radius: float = 0.15
    patch_radius: float = 0.8
    normal_floor: float = 0.1
    max_steps: int = 200
    polish: bool = True
    polish_maxiter: int = 300
    corner_factor: float = 3.0
    fd_steps: List[float] = field(default_factory=lambda: [4e-3, 2e-3, 1e-3])
    fd_trials: int = 50
    candidate_pairs: int = 4
    margin_use: float = 0.25
    margin_fraction: float = 0.5


@dataclass
class ToleranceConfig:
    """数值容差; curvature 为 None 时按维数取默认值 (n=1: 1e-6, n=2: 1e-3)"""
    curvature: Optional[float] = None
    volume: float = 1e-12
    containment: float = 1e-8
    stall: float = 1e-10

    def curvature_for(self, n: int) -> float:
        if self.curvature is not None:
            return self.curvature
        return 1e-6 if n == 1 else 1e-3

    def apply_env_overrides(self, environ: Optional[Mapping[str, str]] = None) -> List[str]:
        """读取 REVISO_TOL_<NAME> 环境变量, 返回被覆盖的字段名"""
        environ = os.environ if environ is None else environ
        applied = []
        for item in fields(self):
            raw = environ.get(ENV_PREFIX + item.name.upper())
            if raw is None or raw == "":
                continue
            try:
                value = float(raw)
            except ValueError as e:
                raise ConfigError(f"环境变量 {ENV_PREFIX + item.name.upper()} 不是数字: {raw!r}") from e
            if not value > 0:
                raise ConfigError(f"容差必须为正: {ENV_PREFIX + item.name.upper()}={raw}")
            setattr(self, item.name, value)
            applied.append(item.name)
        return applied


@dataclass
class ExperimentConfig:
    """一次实验的完整配置"""
    subcommand: str = "measure"
    kind: str = "Euclidean"
    lam: float = 1.0
    rng_seed: int = 0
    out_dir: str = "results"
    grid: GridConfig = field(default_factory=GridConfig)
    body: BodyConfig = field(default_factory=BodyConfig)
    lens: LensConfig = field(default_factory=LensConfig)
    perturbation: PerturbationConfig = field(default_factory=PerturbationConfig)
    tolerances: ToleranceConfig = field(default_factory=ToleranceConfig)

    @property
    def spaceform(self) -> SpaceformKind:
        return SpaceformKind.from_label(self.kind)

    def validate(self):
        if self.subcommand not in SUBCOMMANDS:
            raise ConfigError(f"未知的子命令: {self.subcommand!r}")
        try:
            self.spaceform
        except DomainError as e:
            raise ConfigError(str(e)) from e
        if self.grid.n not in (1, 2):
            raise ConfigError(f"grid.n 必须是 1 或 2: {self.grid.n}")
        if not self.lam > 0:
            raise ConfigError(f"lam 必须为正: {self.lam}")
        if self.body.shape not in BODY_SHAPES:
            raise ConfigError(f"未知的凸体形状: {self.body.shape!r}")
        if self.body.shape == "file" and not self.body.path:
            raise ConfigError("shape=\"file\" 需要 body.path")
        if self.perturbation.mode not in ("auto", "case1", "case2"):
            raise ConfigError(f"未知的扰动模式: {self.perturbation.mode!r}")
        if self.perturbation.candidate_pairs < 1:
            raise ConfigError(f"candidate_pairs 至少为 1: {self.perturbation.candidate_pairs}")
        if not 0 < self.perturbation.margin_use <= 1:
            raise ConfigError(f"margin_use 必须在 (0, 1] 内: {self.perturbation.margin_use}")
        if not 0 <= self.perturbation.margin_fraction < 1:
            raise ConfigError(f"margin_fraction 必须在 [0, 1) 内: {self.perturbation.margin_fraction}")
        if self.rng_seed < 0:
            raise ConfigError("rng_seed 必须非负")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def config_hash(self) -> str:
        """完整配置 (含默认值) 的 SHA-256"""
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ExperimentConfig":
        config = _build(cls, data, "")
        config.validate()
        return config

    @classmethod
    def from_file(cls, path: Path) -> "ExperimentConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except OSError as e:
            raise ConfigError(f"无法读取配置文件 {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"配置文件不是合法JSON {path}: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError("配置文件顶层必须是对象")
        return cls.from_dict(data)


def _build(cls, data: Mapping[str, Any], prefix: str):
    if not isinstance(data, Mapping):
        raise ConfigError(f"配置段 {prefix or '<root>'} 必须是对象")
    known = {item.name: item for item in fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"未知的配置项: {', '.join(prefix + key for key in unknown)}")
    kwargs = {}
    for name, value in data.items():
        default = getattr(cls(), name)
        if is_dataclass(default):
            kwargs[name] = _build(type(default), value, f"{prefix}{name}.")
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except TypeError as e:
        raise ConfigError(f"配置段 {prefix or '<root>'} 无效: {e}") from e
