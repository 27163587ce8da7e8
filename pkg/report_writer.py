"""
报告输出模块 - summary.json 与 CSV 表格的确定性写出, 以及控制台展示
"""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from geometry_errors import ReportError

try:
    from rich.console import Console
    from rich.panel import Panel
    from rich.table import Table
    RICH_AVAILABLE = True
except ImportError:
    RICH_AVAILABLE = False

try:
    import colorama
    from colorama import Fore, Style
    colorama.init()
    COLORAMA_AVAILABLE = True
except ImportError:
    COLORAMA_AVAILABLE = False

logger = logging.getLogger(__name__)

CSV_FLOAT_FORMAT = "%.17g"
SUMMARY_FILE = "summary.json"

# 固定列顺序的表格
TABLE_SCHEMAS = {
    "trajectory": ["step", "t", "area", "volume", "b", "min_kappa", "case"],
    "beta_profile": ["t", "beta"],
}


@dataclass
class ExperimentOutcome:
    """一个子命令的结果: 是否通过、摘要、表格、失败记录与备注"""
    passed: bool
    summary: Dict[str, Any] = field(default_factory=dict)
    tables: Dict[str, pd.DataFrame] = field(default_factory=dict)
    failures: List[Dict[str, Any]] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)

    def fail(self, check: str, message: str, **details):
        """记录一条可机读的失败"""
        self.passed = False
        record = {"check": check, "message": message}
        record.update(details)
        self.failures.append(record)

    def require(self, condition: bool, check: str, message: str, **details) -> bool:
        if not condition:
            self.fail(check, message, **details)
        return bool(condition)


def to_jsonable(value: Any) -> Any:
    """numpy 标量/数组转为 JSON 值; 非有限浮点数写成 null"""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, Path):
        return str(value)
    return value


def _schema_frame(name: str, frame: pd.DataFrame) -> pd.DataFrame:
    columns = TABLE_SCHEMAS.get(name)
    if columns is None:
        return frame
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise ReportError(f"表 {name} 缺少列 {missing}", name)
    return frame[columns]


def emit_report(outcome: ExperimentOutcome, config, out_dir: Path) -> List[Path]:
    """写出 summary.json 和每张表一个 CSV; 返回写出的路径"""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ReportError(f"无法创建输出目录: {e}", str(out_dir)) from e

    written = []
    for name in sorted(outcome.tables):
        path = out_dir / f"{name}.csv"
        frame = _schema_frame(name, outcome.tables[name])
        try:
            frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
        except OSError as e:
            raise ReportError(f"无法写入表格: {e}", str(path)) from e
        written.append(path)

    document = {
        "subcommand": config.subcommand,
        "passed": outcome.passed,
        "summary": outcome.summary,
        "failures": outcome.failures,
        "notes": outcome.notes,
        "tables": sorted(f"{name}.csv" for name in outcome.tables),
        "config": config.to_dict(),
        "config_hash": config.config_hash(),
    }
    path = out_dir / SUMMARY_FILE
    try:
        text = json.dumps(to_jsonable(document), indent=2, sort_keys=True, ensure_ascii=False)
        path.write_text(text + "\n", encoding="utf-8")
    except OSError as e:
        raise ReportError(f"无法写入摘要: {e}", str(path)) from e
    written.append(path)
    logger.info("report written to %s (%d files)", out_dir, len(written))
    return written


class ConsoleReporter:
    """实验结果的控制台展示 (rich 优先, colorama 或纯文本兜底)"""

    def __init__(self, use_rich: bool = True):
        self.use_rich = use_rich and RICH_AVAILABLE
        self.use_colorama = COLORAMA_AVAILABLE and not self.use_rich
        self.console = Console() if self.use_rich else None

    def _plain(self, marker: str, message: str, color: Optional[str]):
        if self.use_colorama and color is not None:
            print(f"{getattr(Fore, color)}{marker} {message}{Style.RESET_ALL}")
        else:
            print(f"{marker} {message}")

    def display_success(self, message: str):
        if self.use_rich:
            self.console.print(f"✓ {message}", style="green")
        else:
            self._plain("✓", message, "GREEN")

    def display_warning(self, message: str):
        if self.use_rich:
            self.console.print(f"⚠ {message}", style="yellow")
        else:
            self._plain("⚠", message, "YELLOW")

    def display_error(self, message: str):
        if self.use_rich:
            self.console.print(f"❌ {message}", style="red")
        else:
            self._plain("❌", message, "RED")

    def show_outcome(self, subcommand: str, outcome: ExperimentOutcome):
        """摘要表 + 失败记录"""
        flat = {k: v for k, v in outcome.summary.items() if not isinstance(v, (dict, list))}
        if self.use_rich:
            table = Table(title=f"{subcommand}", show_header=True, header_style="bold magenta")
            table.add_column("项目", style="cyan")
            table.add_column("值", style="white")
            for key in sorted(flat):
                table.add_row(key, _format_value(flat[key]))
            self.console.print(table)
        else:
            print("=" * 60)
            print(subcommand)
            print("-" * 60)
            for key in sorted(flat):
                print(f"  {key}: {_format_value(flat[key])}")
        for note in outcome.notes:
            self.display_warning(note)
        for failure in outcome.failures:
            self.display_error(f"{failure['check']}: {failure['message']}")
        if outcome.passed:
            self.display_success(f"{subcommand}: 所有断言通过")
        else:
            self.display_error(f"{subcommand}: {len(outcome.failures)} 项断言失败")

    def show_performance(self, summary: Dict[str, Any]):
        if "message" in summary:
            self.display_warning(summary["message"])
            return
        if not self.use_rich:
            for name, stats in summary["stages"].items():
                print(f"  ⏱ {name}: {stats['total_duration']:.2f}s ({stats['max_memory_delta']:+.1f}MB)")
            return
        table = Table(title="阶段耗时", show_header=True, header_style="bold magenta")
        table.add_column("阶段", style="cyan")
        table.add_column("次数", style="white")
        table.add_column("耗时", style="yellow")
        table.add_column("内存变化", style="blue")
        for name, stats in summary["stages"].items():
            table.add_row(name, str(stats["calls"]), f"{stats['total_duration']:.2f}s",
                          f"{stats['max_memory_delta']:+.1f}MB")
        self.console.print(Panel(table, border_style="green"))


def _format_value(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)
