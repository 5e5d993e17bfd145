"""Scriptable classifier-output simulation: scenario files, a mock headset
server speaking the same wire protocol, and threshold-sweep metrics."""

from mindbridge.simulator.metrics import (
    MetricsReport,
    evaluate_run,
    sweep_thresholds,
    write_metrics_csv,
)
from mindbridge.simulator.scenario import Scenario, Segment, generate_stream

__all__ = [
    "MetricsReport",
    "Scenario",
    "Segment",
    "evaluate_run",
    "generate_stream",
    "sweep_thresholds",
    "write_metrics_csv",
]
