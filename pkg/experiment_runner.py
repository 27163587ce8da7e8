"""
实验运行器 - 批处理命令行入口

用法:
    python experiment_runner.py <subcommand> [--config PATH] [--out DIR] [--seed N] [--verbose]

退出码: 0 全部断言通过, 1 有断言失败 (summary.json 中带失败记录), 2 配置错误
"""

import argparse
import dataclasses
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np
import pandas as pd
from dotenv import load_dotenv
from scipy.optimize import brentq
from tqdm import tqdm

from area_perturbation import bprime_check, finite_difference_check, maximize_area, run_perturb_trajectory
from curvature_analysis import global_blaschke_check, lambda_convexity_check, shape_operator
from experiment_config import SUBCOMMANDS, ExperimentConfig
from geometry_errors import (
    ConfigError, DomainError, GeometryLabError, MarginViolation, NumericalFailure, ReportError, TrivialBody,
)
from lens_enclosure import (
    beta_profile_check, circumradius_bruteforce, enclosing_ball, make_lens, make_lens_body,
    random_lens_point, run_enclosure_chain,
)
from performance_monitor import PerformanceContext, PerformanceMonitor
from radial_body import (
    RadialBody, load_body, make_ball, make_ellipsoid, make_perturbed_ball, measure,
    reference_closed_forms, save_body,
)
from report_writer import ConsoleReporter, ExperimentOutcome, emit_report
from sphere_grid import SphereGrid, make_grid
from spaceform_geometry import (
    SpaceformKind, lambda_interval, lambda_of_radius, radius_of_lambda, warp_functions,
)
from variation_formulas import VariationField

try:
    from rich.logging import RichHandler
    RICH_AVAILABLE = True
except ImportError:
    RICH_AVAILABLE = False

logger = logging.getLogger(__name__)

SPACEFORMS = (SpaceformKind.EUCLIDEAN, SpaceformKind.SPHERICAL, SpaceformKind.HYPERBOLIC)
TABLE_LAMBDAS = (0.5, 0.8, 1.0, 1.5, 2.0, 3.0)


# ---------------------------------------------------------------------------
# 凸体与网格
# ---------------------------------------------------------------------------

def build_grid(config: ExperimentConfig) -> SphereGrid:
    try:
        return make_grid(config.grid.n, config.grid.size, config.grid.level)
    except DomainError as e:
        raise ConfigError(f"网格配置无效: {e}") from e


def build_body(config: ExperimentConfig, grid: Optional[SphereGrid] = None) -> RadialBody:
    """按 body 配置构造种子凸体; 参数非法时抛出 ConfigError"""
    spec = config.body
    kind = config.spaceform
    if spec.shape == "file":
        body = load_body(Path(spec.path))
        if body.kind is not kind or body.n != config.grid.n:
            raise ConfigError(f"文件中的凸体 ({body.kind.label}, n={body.n}) 与配置不一致")
        return body
    grid = grid or build_grid(config)
    try:
        if spec.shape == "ball":
            return make_ball(kind, spec.radius, grid)
        if spec.shape == "perturbed_ball":
            return make_perturbed_ball(kind, spec.radius, grid, spec.amplitude, spec.mode)
        if spec.shape == "ellipsoid":
            return make_ellipsoid(kind, spec.axes, grid)
        if spec.shape == "lens":
            return make_lens_body(make_lens(kind, spec.lens_lambda, spec.lens_distance, grid.n), grid)
    except DomainError as e:
        raise ConfigError(f"无法构造凸体 {spec.shape!r}: {e}") from e
    raise ConfigError(f"子命令 {config.subcommand} 不支持凸体形状 {spec.shape!r}")


def random_body(kind: SpaceformKind, grid: SphereGrid, rng: np.random.Generator) -> RadialBody:
    """随机低频扰动球"""
    top = 1.0 if kind is SpaceformKind.SPHERICAL else 1.2
    radius = rng.uniform(0.5, top)
    amplitude = rng.uniform(0.0, 0.06) * radius
    mode = int(rng.integers(2, 5))
    return make_perturbed_ball(kind, radius, grid, amplitude, mode)


def random_field(body: RadialBody, rng: np.random.Generator, scale: float = 0.1) -> VariationField:
    """节点方向上不超过二次的多项式作为法向速度与加速度"""
    xi = body.directions
    dim = xi.shape[1]
    columns = [np.ones(len(xi))] + [xi[:, i] for i in range(dim)]
    columns += [xi[:, i] * xi[:, j] for i in range(dim) for j in range(i, dim)]
    basis = np.column_stack(columns)
    v = basis @ rng.normal(scale=scale, size=basis.shape[1])
    a = basis @ rng.normal(scale=scale, size=basis.shape[1])
    return VariationField.from_values(v, a)


def _resolutions(config: ExperimentConfig) -> List[ExperimentConfig]:
    """测量收敛研究用的三个逐级加密网格"""
    if config.grid.n == 1:
        sizes = [max(config.grid.size // 4, 8), max(config.grid.size // 2, 8), config.grid.size]
        return [dataclasses.replace(config, grid=dataclasses.replace(config.grid, size=s)) for s in sizes]
    levels = [max(config.grid.level - 2, 1), max(config.grid.level - 1, 1), config.grid.level]
    return [dataclasses.replace(config, grid=dataclasses.replace(config.grid, level=lv)) for lv in levels]


def measure_reference(config: ExperimentConfig) -> Dict[str, float]:
    """已知闭式面积/体积的种子; 只有体积闭式的扰动球只给出 volume"""
    spec, kind, n = config.body, config.spaceform, config.grid.n
    if spec.shape == "ball":
        ref = reference_closed_forms("ball", {"kind": kind, "n": n, "R": spec.radius})
        return {"area": ref.area, "volume": ref.volume}
    if spec.shape == "lens" and kind is SpaceformKind.EUCLIDEAN:
        name = "lens2d" if n == 1 else "lens3d"
        ref = reference_closed_forms(name, {"lam": spec.lens_lambda, "d": spec.lens_distance})
        return {"area": ref.area, "volume": ref.volume}
    if spec.shape == "perturbed_ball" and kind is SpaceformKind.EUCLIDEAN and spec.mode == 2:
        R, a = spec.radius, spec.amplitude
        if n == 1:
            return {"volume": np.pi * R ** 2 + 0.5 * np.pi * a ** 2}
        return {"volume": 4 * np.pi * R ** 3 / 3 + 4 * np.pi * R * a ** 2 / 5 + 8 * np.pi * a ** 3 / 105}
    return {}


def matched_lens_perimeter(lam: float, volume: float) -> Optional[float]:
    """与给定面积相同的欧氏平面 λ-透镜的周长; 面积超过 π/λ² 时不存在"""
    radius = 1.0 / lam
    if not 0 < volume < np.pi * radius ** 2:
        return None

    def gap(d: float) -> float:
        return reference_closed_forms("lens2d", {"lam": lam, "d": d}).volume - volume

    d = brentq(gap, 1e-12, 2.0 * radius * (1 - 1e-12), xtol=1e-14)
    return reference_closed_forms("lens2d", {"lam": lam, "d": d}).area


# ---------------------------------------------------------------------------
# 子命令
# ---------------------------------------------------------------------------

def run_spaceform_table(config: ExperimentConfig, verbose: bool) -> ExperimentOutcome:
    outcome = ExperimentOutcome(passed=True)
    rows = []
    for kind in SPACEFORMS:
        for lam in TABLE_LAMBDAS:
            lam_class = radius_of_lambda(kind, lam, strict=False)
            roundtrip = (abs(lambda_of_radius(kind, lam_class.radius) - lam)
                         if lam_class.in_interval else float("nan"))
            rows.append({"kind": kind.label, "lam": lam, "in_interval": lam_class.in_interval,
                         "radius": lam_class.radius if lam_class.in_interval else float("nan"),
                         "roundtrip_error": roundtrip})
            if lam_class.in_interval:
                outcome.require(roundtrip <= 1e-12 * max(1.0, lam), "radius_roundtrip",
                                f"{kind.label} λ={lam}: λ(R(λ)) 误差 {roundtrip:.3e}")
    outcome.tables["radius_table"] = pd.DataFrame(rows)

    warp_rows = []
    for kind in SPACEFORMS:
        top = 3.0 if kind is SpaceformKind.SPHERICAL else 2.0
        r = np.linspace(0.0, top, 31)
        theta, theta_prime, big_theta = warp_functions(kind, r)
        warp_rows.append(pd.DataFrame({"kind": kind.label, "r": r, "theta": theta,
                                       "theta_prime": theta_prime, "Theta": big_theta}))
    outcome.tables["warp_table"] = pd.concat(warp_rows, ignore_index=True)

    anchors = {
        "E_lambda2": (radius_of_lambda(SpaceformKind.EUCLIDEAN, 2.0).radius, 0.5, 0.0),
        "S_lambda1": (radius_of_lambda(SpaceformKind.SPHERICAL, 1.0).radius, np.pi / 4, 1e-10),
        "H_lambda2": (radius_of_lambda(SpaceformKind.HYPERBOLIC, 2.0).radius, 0.5 * np.log(3.0), 1e-10),
    }
    for name, (value, expected, tol) in anchors.items():
        outcome.summary[name] = value
        outcome.require(abs(value - expected) <= tol, name, f"{value!r} != {expected!r}")
    h_boundary = radius_of_lambda(SpaceformKind.HYPERBOLIC, 1.0, strict=False)
    outcome.summary["H_lambda1_in_interval"] = h_boundary.in_interval
    outcome.require(not h_boundary.in_interval, "H_lambda1", "双曲空间 λ=1 应不在 I_Σ 中")
    return outcome


def run_measure(config: ExperimentConfig, verbose: bool) -> ExperimentOutcome:
    outcome = ExperimentOutcome(passed=True)
    reference = measure_reference(config)
    n = config.grid.n
    studies = _resolutions(config) if config.body.shape != "file" else [config]
    rows = []
    body = None
    for study in studies:
        body = build_body(study, None if study.body.shape == "file" else build_grid(study))
        area, volume = measure(body)
        row = {"nodes": len(body.grid), "spacing": body.grid.spacing, "area": area, "volume": volume}
        for key, value in reference.items():
            row[f"{key}_error"] = abs(row[key] - value) / abs(value)
        rows.append(row)
    table = pd.DataFrame(rows)
    outcome.tables["measure"] = table
    final = rows[-1]
    outcome.summary.update({"area": final["area"], "volume": final["volume"], "nodes": final["nodes"]})

    rel_tol = 1e-8 if n == 1 else 1e-3
    min_order = 2.0 if n == 1 else 1.8
    smooth = bool(np.all(body.smoothness_flags))
    for key, value in reference.items():
        outcome.summary[f"reference_{key}"] = value
        errors = table[f"{key}_error"].to_numpy()
        outcome.summary[f"{key}_relative_error"] = float(errors[-1])
        outcome.require(errors[-1] <= rel_tol, f"{key}_accuracy",
                        f"{key} 相对误差 {errors[-1]:.3e} > {rel_tol:g}")
        if len(errors) >= 2 and errors[-1] > 1e-13 and errors[-2] > 1e-13:
            spacing = table["spacing"].to_numpy()
            order = float(np.log(errors[-2] / errors[-1]) / np.log(spacing[-2] / spacing[-1]))
            outcome.summary[f"{key}_order"] = order
            if smooth:
                outcome.require(order >= min_order, f"{key}_order",
                                f"{key} 观测收敛阶 {order:.2f} < {min_order}")
            else:
                outcome.notes.append(f"{key}: 非光滑凸体只记录收敛阶 {order:.2f}")
    if not reference:
        outcome.notes.append("没有闭式参考值, 只记录测量结果")
    return outcome


def _random_check_suite(config: ExperimentConfig, verbose: bool) -> ExperimentOutcome:
    outcome = ExperimentOutcome(passed=True)
    kind = config.spaceform
    grid = build_grid(config)
    rng = np.random.default_rng(config.rng_seed)
    lo, _ = lambda_interval(kind)
    tol = config.tolerances.curvature_for(grid.n)
    rows = []
    for trial in tqdm(range(config.body.trials), desc="Blaschke trials", disable=not verbose):
        body = random_body(kind, grid, rng)
        report = shape_operator(body)
        lam = max(float(np.min(report.kappa_min)) * rng.uniform(0.8, 1.1), lo + 1e-3)
        check = lambda_convexity_check(body, lam, tol, report)
        blaschke = None
        if check.is_lambda_convex:
            blaschke = global_blaschke_check(body, lam, tol, report)
            outcome.require(blaschke, "blaschke", f"第 {trial} 个凸体通过 λ-凸检查但支撑球不包含整个凸体",
                            trial=trial, lam=lam)
        rows.append({"trial": trial, "lam": lam, "min_kappa": check.min_kappa,
                     "is_lambda_convex": check.is_lambda_convex,
                     "blaschke": np.nan if blaschke is None else float(blaschke)})
    table = pd.DataFrame(rows, columns=["trial", "lam", "min_kappa", "is_lambda_convex", "blaschke"])
    outcome.tables["blaschke_trials"] = table
    rejected = int((~table["is_lambda_convex"].astype(bool)).sum())
    outcome.summary.update({"trials": len(table), "rejected": rejected,
                            "accepted": len(table) - rejected})
    outcome.require(rejected > 0, "rejection", "随机样本中没有被拒绝的非 λ-凸凸体")
    return outcome


def run_check(config: ExperimentConfig, verbose: bool) -> ExperimentOutcome:
    if config.body.shape == "random":
        return _random_check_suite(config, verbose)
    outcome = ExperimentOutcome(passed=True)
    body = build_body(config)
    tol = config.tolerances.curvature_for(body.n)
    report = shape_operator(body)
    outcome.tables["curvature"] = report.to_frame()
    check = lambda_convexity_check(body, config.lam, tol, report)
    outcome.summary.update({
        "lam": config.lam, "is_lambda_convex": check.is_lambda_convex, "min_kappa": check.min_kappa,
        "violation_node": check.violation_node, "witness_strict": check.witness_strict,
        "method": check.method, "failed_nonsmooth": list(check.failed_nonsmooth),
    })
    if check.note:
        outcome.notes.append(check.note)
    if not check.is_lambda_convex:
        outcome.fail("lambda_convexity", f"not λ-convex, witness node {check.violation_node}",
                     witness_node=check.violation_node, min_kappa=check.min_kappa)
        return outcome
    if radius_of_lambda(body.kind, config.lam, strict=False).in_interval:
        blaschke = global_blaschke_check(body, config.lam, tol, report)
        outcome.summary["blaschke"] = blaschke
        outcome.require(blaschke, "blaschke", "支撑球不包含整个凸体")
    else:
        outcome.notes.append("λ ∉ I_Σ, 跳过全局支撑球检查")
    return outcome


def run_variation_verify(config: ExperimentConfig, verbose: bool) -> ExperimentOutcome:
    outcome = ExperimentOutcome(passed=True)
    kind = config.spaceform
    grid = build_grid(config)
    rng = np.random.default_rng(config.rng_seed)
    frames, worst = [], {}
    for trial in tqdm(range(config.perturbation.fd_trials), desc="variation-verify", disable=not verbose):
        body = random_body(kind, grid, rng)
        vf = random_field(body, rng)
        result = finite_difference_check(body, vf, h_sequence=config.perturbation.fd_steps)
        frames.append(result.table.assign(trial=trial))
        for name, err in result.relative_errors.items():
            worst[name] = max(worst.get(name, 0.0), err)
        outcome.require(result.passed, "finite_difference", f"第 {trial} 组 (凸体, 变分场) 未通过",
                        trial=trial, relative_errors=result.relative_errors, orders=result.orders)
    outcome.tables["finite_differences"] = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame()
    outcome.summary.update({"trials": config.perturbation.fd_trials, "kind": kind.label})
    outcome.summary.update({f"worst_{k}": v for k, v in sorted(worst.items())})
    return outcome


def run_perturb(config: ExperimentConfig, verbose: bool) -> ExperimentOutcome:
    outcome = ExperimentOutcome(passed=True)
    body = build_body(config)
    trajectory = run_perturb_trajectory(body, config.lam, config.perturbation, config.tolerances)
    outcome.tables["trajectory"] = trajectory.to_frame()
    outcome.notes.extend(trajectory.notes)
    drift = trajectory.volume_drift()
    outcome.summary.update({"accepted_steps": trajectory.accepted_steps, "case": trajectory.case_used,
                            "volume_drift": drift})
    trivial = any(note.startswith("TrivialBody") for note in trajectory.notes)
    if trivial and trajectory.accepted_steps == 0:
        outcome.summary["trivial"] = True
        return outcome
    areas = trajectory.to_frame()["area"].to_numpy()
    outcome.require(trajectory.accepted_steps >= config.perturbation.steps, "accepted_steps",
                    f"只接受了 {trajectory.accepted_steps} 步, 需要 {config.perturbation.steps}")
    outcome.require(bool(np.all(np.diff(areas) > 0)), "area_monotone", "面积没有严格递增")
    outcome.require(drift <= 1e-8, "volume_drift", f"体积漂移 {drift:.3e} > 1e-8")
    if trajectory.case_used == 1:
        slope = bprime_check(body, config.lam, 1e-3, "case1", config.perturbation, config.tolerances)
        outcome.summary["bprime"] = slope
        outcome.require(abs(slope["centered"] + 1.0) <= 1e-3, "bprime",
                        f"b'(0) = {slope['centered']:.6g}, 期望 -1")
    return outcome


def run_maximize(config: ExperimentConfig, verbose: bool, out_dir: Path) -> ExperimentOutcome:
    outcome = ExperimentOutcome(passed=True)
    body = build_body(config)
    result = maximize_area(body, config.lam, config.perturbation, config.tolerances)
    trajectory = result.trajectory
    outcome.tables["trajectory"] = trajectory.to_frame()
    outcome.tables["kappa_excess"] = pd.DataFrame({"kappa_excess": result.kappa_excess})
    outcome.notes.extend(result.notes)
    seed_area, seed_volume = measure(body)
    final_area, final_volume = measure(result.final)
    outcome.summary.update({
        "accepted_steps": trajectory.accepted_steps, "polished": result.polished,
        "seed_area": seed_area, "final_area": final_area, "final_volume": final_volume,
        "tight_fraction": result.tight_fraction,
    })
    if any(note.startswith("TrivialBody") for note in trajectory.notes) and trajectory.accepted_steps == 0:
        outcome.summary["trivial"] = True
        return outcome
    try:
        save_body(result.final, Path(out_dir) / "body_final.json")
    except ReportError as e:
        outcome.notes.append(f"无法保存最终凸体: {e}")
    outcome.summary["final_min_kappa"] = result.min_kappa
    outcome.require(result.convex, "final_convexity", f"最终凸体不是 λ-凸的 (min κ₁={result.min_kappa:.6g})")
    outcome.require(final_area > seed_area, "area_gain", f"面积没有增加: {final_area:.10g} ≤ {seed_area:.10g}")
    outcome.require(result.tight_fraction >= 0.95, "tightness",
                    f"只有 {result.tight_fraction:.1%} 的光滑弧长满足 κ₁ - λ ≤ 5·tol")
    if body.kind is SpaceformKind.EUCLIDEAN and body.n == 1:
        bound = matched_lens_perimeter(config.lam, final_volume)
        outcome.summary["lens_perimeter"] = bound
        if bound is not None:
            outcome.require(final_area <= bound + 1e-2, "lens_bound",
                            f"周长 {final_area:.10g} 超过同面积透镜周长 {bound:.10g}")
    return outcome


def _random_lens(kind: SpaceformKind, n: int, rng: np.random.Generator):
    lo = {SpaceformKind.EUCLIDEAN: 0.5, SpaceformKind.SPHERICAL: 0.2, SpaceformKind.HYPERBOLIC: 1.05}[kind]
    lam = rng.uniform(lo, 3.0)
    radius = radius_of_lambda(kind, lam).radius
    return make_lens(kind, lam, radius * rng.uniform(0.05, 1.95), n)


def run_lens(config: ExperimentConfig, verbose: bool) -> ExperimentOutcome:
    outcome = ExperimentOutcome(passed=True)
    kind, n = config.spaceform, config.grid.n
    settings = config.lens
    rng = np.random.default_rng(config.rng_seed)

    if radius_of_lambda(kind, config.lam, strict=False).in_interval:
        try:
            lens = make_lens(kind, config.lam, settings.distance, n)
        except DomainError as e:
            raise ConfigError(f"透镜参数无效: {e}") from e
        enclosure = enclosing_ball(lens, settings.boundary_samples)
        oracle = circumradius_bruteforce(lens, settings.oracle_resolution, settings.boundary_samples)
        outcome.summary.update({"lens": lens.to_dict(), "rho": enclosure.rho, "margin": enclosure.margin,
                                "oracle_rho": oracle})
        outcome.require(abs(enclosure.rho - oracle) <= 1e-6, "oracle",
                        f"中点包围半径 {enclosure.rho:.10g} 与暴力搜索 {oracle:.10g} 不一致")
        passed = 0
        for i in range(settings.beta_points):
            z = random_lens_point(lens, rng)
            beta = beta_profile_check(lens, z, settings.beta_samples)
            if i == 0:
                outcome.tables["beta_profile"] = beta.profile
            passed += int(beta.passed)
        outcome.summary["beta_passed"] = passed
        outcome.require(passed == settings.beta_points, "beta_profile",
                        f"{settings.beta_points - passed} 个 β-剖面检查失败")
    else:
        outcome.notes.append("λ ∉ I_Σ, 跳过透镜锚点")

    rows = []
    for trial in tqdm(range(settings.trials), desc="lens trials", disable=not verbose):
        trial_kind = SPACEFORMS[trial % len(SPACEFORMS)]
        lens = _random_lens(trial_kind, n, rng)
        try:
            margin = enclosing_ball(lens, settings.boundary_samples).margin
        except MarginViolation as e:
            margin = float("nan")
            outcome.fail("margin", str(e), trial=trial, kind=trial_kind.label)
        rows.append({"trial": trial, "kind": trial_kind.label, "lam": lens.lambda_class.lam,
                     "d": lens.d, "margin": margin})
    outcome.tables["lens_trials"] = pd.DataFrame(rows, columns=["trial", "kind", "lam", "d", "margin"])

    if config.body.shape not in ("random",):
        body = build_body(config)
        if lambda_convexity_check(body, config.lam, config.tolerances.curvature_for(n)).is_lambda_convex:
            try:
                chain = run_enclosure_chain(body, config.lam, config.tolerances.curvature_for(n))
                outcome.summary["chain"] = chain.to_dict()
                outcome.notes.extend(chain.notes)
            except TrivialBody as e:
                outcome.notes.append(f"TrivialBody: {e}")
        else:
            outcome.notes.append("种子凸体不是 λ-凸的, 跳过支撑球链条")
    return outcome


SUBCOMMAND_HANDLERS: Dict[str, Callable[..., ExperimentOutcome]] = {
    "spaceform-table": run_spaceform_table,
    "measure": run_measure,
    "check": run_check,
    "variation-verify": run_variation_verify,
    "perturb": run_perturb,
    "lens": run_lens,
}

NUMERICAL_ERRORS = (np.linalg.LinAlgError, FloatingPointError, ArithmeticError, RuntimeError, ValueError)


# ---------------------------------------------------------------------------
# 入口
# ---------------------------------------------------------------------------

def run_experiment(config: ExperimentConfig, verbose: bool = False,
                   reporter: Optional[ConsoleReporter] = None,
                   monitor: Optional[PerformanceMonitor] = None) -> int:
    """执行一个子命令并写出报告, 返回退出码"""
    reporter = reporter or ConsoleReporter(use_rich=False)
    monitor = monitor or PerformanceMonitor(verbose=verbose)
    try:
        config.validate()
    except ConfigError as e:
        reporter.display_error(f"配置错误: {e}")
        return 2
    out_dir = Path(config.out_dir)
    try:
        with PerformanceContext(monitor, config.subcommand):
            if config.subcommand == "maximize":
                out_dir.mkdir(parents=True, exist_ok=True)
                outcome = run_maximize(config, verbose, out_dir)
            else:
                outcome = SUBCOMMAND_HANDLERS[config.subcommand](config, verbose)
    except ConfigError as e:
        reporter.display_error(f"配置错误: {e}")
        return 2
    except GeometryLabError as e:
        logger.exception("experiment %s failed", config.subcommand)
        outcome = ExperimentOutcome(passed=False)
        outcome.fail(type(e).__name__, str(e))
    except NUMERICAL_ERRORS as e:
        logger.exception("experiment %s hit a numerical error", config.subcommand)
        failure = NumericalFailure(f"{type(e).__name__}: {e}", type(e).__name__)
        outcome = ExperimentOutcome(passed=False)
        outcome.fail(type(failure).__name__, str(failure), cause=failure.cause_type)

    try:
        with PerformanceContext(monitor, "emit_report"):
            emit_report(outcome, config, out_dir)
    except ReportError as e:
        reporter.display_error(f"报告写入失败: {e}")
        return 1
    reporter.show_outcome(config.subcommand, outcome)
    if verbose:
        monitor.print_performance_report(reporter)
    return 0 if outcome.passed else 1


def setup_logging(verbose: bool):
    level = logging.DEBUG if verbose else logging.INFO
    if RICH_AVAILABLE:
        logging.basicConfig(level=level, format="%(message)s", datefmt="[%X]",
                            handlers=[RichHandler(rich_tracebacks=True)], force=True)
    else:
        logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s", force=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="λ-凸体反等周实验")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", type=Path, default=None, help="JSON 配置文件")
    parser.add_argument("--out", type=Path, default=None, help="输出目录 (覆盖 out_dir)")
    parser.add_argument("--seed", type=int, default=None, help="随机种子 (覆盖 rng_seed)")
    parser.add_argument("--verbose", action="store_true", help="DEBUG 日志与进度条")
    return parser


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    """配置文件 + 命令行覆盖 + REVISO_TOL_* 环境变量"""
    config = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    config.subcommand = args.subcommand
    if args.out is not None:
        config.out_dir = str(args.out)
    if args.seed is not None:
        config.rng_seed = args.seed
    applied = config.tolerances.apply_env_overrides()
    if applied:
        logger.info("tolerance overrides from environment: %s", ", ".join(applied))
    config.validate()
    return config


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    load_dotenv()
    setup_logging(args.verbose)
    reporter = ConsoleReporter()
    try:
        config = load_config(args)
    except ConfigError as e:
        reporter.display_error(f"配置错误: {e}")
        return 2
    return run_experiment(config, verbose=args.verbose, reporter=reporter)


if __name__ == "__main__":
    sys.exit(main())
