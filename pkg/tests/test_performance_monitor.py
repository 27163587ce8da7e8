"""
性能监控测试
"""

import pytest

from performance_monitor import PerformanceContext, PerformanceMonitor


def test_empty_summary():
    assert "message" in PerformanceMonitor().get_summary()


def test_context_records_success_and_failure():
    monitor = PerformanceMonitor()
    with PerformanceContext(monitor, "measure") as ctx:
        pass
    assert ctx.metrics.success
    with pytest.raises(RuntimeError):
        with PerformanceContext(monitor, "measure"):
            raise RuntimeError("boom")
    stats = monitor.get_stage_stats("measure")
    assert stats["calls"] == 2
    assert stats["success_rate"] == 0.5
    assert monitor.metrics_history[-1].error_message == "boom"
    summary = monitor.get_summary()
    assert summary["total_stages"] == 2
    assert list(summary["stages"]) == ["measure"]


def test_unknown_stage():
    assert "error" in PerformanceMonitor().get_stage_stats("missing")


def test_plain_report(capsys):
    monitor = PerformanceMonitor()
    with PerformanceContext(monitor, "lens"):
        pass
    monitor.print_performance_report()
    assert "lens" in capsys.readouterr().out
