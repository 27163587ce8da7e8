"""
性能监控模块 - 记录实验各阶段的耗时与常驻内存变化
计时只输出到控制台/日志, 不写入任何结果文件
"""

import logging
import threading
import time
from dataclasses import dataclass
from typing import Any, Dict, List, Optional

import psutil

logger = logging.getLogger(__name__)

MB = 1024 * 1024


@dataclass
class StageMetrics:
    """单个阶段的性能指标"""
    stage: str
    duration: float
    memory_delta: float      # MB, 常驻内存变化
    success: bool
    error_message: str = ""


class PerformanceMonitor:
    """实验阶段监控器"""

    def __init__(self, verbose: bool = False):
        self.verbose = verbose
        self.metrics_history: List[StageMetrics] = []
        self._open: Dict[str, tuple] = {}
        self._counter = 0
        self._lock = threading.Lock()
        self._process = psutil.Process()

    def _rss(self) -> float:
        return self._process.memory_info().rss / MB

    def start_stage(self, stage: str) -> str:
        with self._lock:
            self._counter += 1
            stage_id = f"{stage}#{self._counter}"
            self._open[stage_id] = (stage, time.perf_counter(), self._rss())
        if self.verbose:
            logger.debug("⏱ 开始阶段: %s", stage)
        return stage_id

    def end_stage(self, stage_id: str, success: bool = True, error_message: str = "") -> StageMetrics:
        end = time.perf_counter()
        with self._lock:
            stage, start, rss0 = self._open.pop(stage_id, (stage_id, end, self._rss()))
            metrics = StageMetrics(stage=stage, duration=end - start,
                                   memory_delta=self._rss() - rss0,
                                   success=success, error_message=error_message)
            self.metrics_history.append(metrics)
        status = "✓" if success else "❌"
        logger.info("%s 阶段完成: %s (耗时: %.2fs, 内存: %+.1fMB)",
                    status, stage, metrics.duration, metrics.memory_delta)
        return metrics

    def get_stage_stats(self, stage: str) -> Dict[str, Any]:
        rows = [m for m in self.metrics_history if m.stage == stage]
        if not rows:
            return {"error": f"未找到阶段 '{stage}' 的性能数据"}
        durations = [m.duration for m in rows]
        return {
            "stage": stage,
            "calls": len(rows),
            "success_rate": sum(m.success for m in rows) / len(rows),
            "total_duration": sum(durations),
            "max_duration": max(durations),
            "max_memory_delta": max(m.memory_delta for m in rows),
        }

    def get_summary(self) -> Dict[str, Any]:
        if not self.metrics_history:
            return {"message": "暂无性能数据"}
        stages = []
        for m in self.metrics_history:
            if m.stage not in stages:
                stages.append(m.stage)
        return {
            "total_stages": len(self.metrics_history),
            "total_duration": sum(m.duration for m in self.metrics_history),
            "stages": {name: self.get_stage_stats(name) for name in stages},
        }

    def print_performance_report(self, reporter: Optional[Any] = None):
        """打印性能报告 (可选交给 ConsoleReporter 渲染)"""
        summary = self.get_summary()
        if reporter is not None:
            reporter.show_performance(summary)
            return
        if "message" in summary:
            print(summary["message"])
            return
        print("=" * 60)
        print(f"阶段数: {summary['total_stages']}  总耗时: {summary['total_duration']:.2f}秒")
        for name, stats in summary["stages"].items():
            print(f"  {name}: {stats['total_duration']:.2f}s, 内存峰值变化 {stats['max_memory_delta']:+.1f}MB")
        print("=" * 60)


class PerformanceContext:
    """阶段监控上下文管理器"""

    def __init__(self, monitor: PerformanceMonitor, stage: str):
        self.monitor = monitor
        self.stage = stage
        self.stage_id = None
        self.metrics: Optional[StageMetrics] = None

    def __enter__(self):
        self.stage_id = self.monitor.start_stage(self.stage)
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.metrics = self.monitor.end_stage(
            self.stage_id,
            success=exc_type is None,
            error_message="" if exc_val is None else str(exc_val),
        )
        return False
